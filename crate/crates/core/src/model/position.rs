//! Relative position of each token with respect to the aspect span.

use super::ModelError;

/// Per-token distance to the nearest aspect token, 1 inside the span.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PositionEncoding(Vec<usize>);

impl PositionEncoding {
    pub fn values(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.0
    }
}

/// Encodes a sentence of `len` tokens whose aspect occupies the 1-based
/// inclusive span `[start, end]`.
///
/// Tokens left of the span get `start - i + 1`, tokens inside get 1 and
/// tokens right of it get `i - end + 1`.
pub fn encode_positions(
    len: usize,
    start: usize,
    end: usize,
) -> Result<PositionEncoding, ModelError> {
    if start == 0 || start > end || end > len {
        return Err(ModelError::BadSpan { len, start, end });
    }
    let p = (1..=len)
        .map(|i| {
            if i < start {
                start - i + 1
            } else if i <= end {
                1
            } else {
                i - end + 1
            }
        })
        .collect();
    Ok(PositionEncoding(p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn space_example_sentence() {
        // "granted the space is smaller than most it is the best service", aspect "space"
        let p = encode_positions(12, 3, 3).unwrap();
        assert_eq!(p.values(), &[3, 2, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10]);
    }

    #[test]
    fn aspect_only_sentence() {
        assert_eq!(encode_positions(1, 1, 1).unwrap().values(), &[1]);
    }

    #[test]
    fn multiword_aspect() {
        assert_eq!(
            encode_positions(5, 2, 4).unwrap().values(),
            &[2, 1, 1, 1, 2]
        );
    }

    #[test]
    fn invalid_spans() {
        assert!(encode_positions(5, 0, 1).is_err());
        assert!(encode_positions(5, 3, 2).is_err());
        assert!(encode_positions(5, 4, 6).is_err());
        assert!(encode_positions(0, 1, 1).is_err());
    }

    proptest! {
        #[test]
        fn symmetric_around_single_word_aspect(len in 1usize..80, k in 1usize..80) {
            prop_assume!(k <= len);
            let p = encode_positions(len, k, k).unwrap();
            let v = p.values();
            for j in 0..len {
                if k > j && k + j <= len {
                    prop_assert_eq!(v[k - j - 1], v[k + j - 1]);
                }
            }
            prop_assert!(v.iter().all(|&x| x >= 1 && x <= len));
        }

        #[test]
        fn shifting_sentence_and_span_shifts_encoding(len in 1usize..79, a in 1usize..79, b in 0usize..5) {
            prop_assume!(a + b <= len);
            let base = encode_positions(len, a, a + b).unwrap();
            let shifted = encode_positions(len + 1, a + 1, a + b + 1).unwrap();
            // a token prepended at the front: the rest keeps its relative value
            prop_assert_eq!(&shifted.values()[1..], base.values());
            prop_assert_eq!(shifted.values()[0], a + 1);
        }
    }
}
