//! Truncation, id encoding and padded mini-batches.

use rand::seq::SliceRandom;
use rand::Rng;

use super::vocab::PAD_ID;
use super::{DataError, Example, Vocab};
use crate::model::{encode_positions, Instance};

/// Token window `[start, start + n)` (0-based) that keeps the aspect span
/// whole, centring it when the sentence is longer than `n`.
pub fn truncation_window(
    len: usize,
    span: (usize, usize),
    n: usize,
) -> Result<(usize, usize), DataError> {
    let span_len = span.1 - span.0 + 1;
    if span_len > n {
        return Err(DataError::SpanTooLong {
            span_len,
            max_len: n,
        });
    }
    if len <= n {
        return Ok((0, len));
    }
    let lead = (n - span_len) / 2;
    let start = (span.0 - 1).saturating_sub(lead).min(len - n);
    Ok((start, start + n))
}

/// Truncates `ex` to at most `n` tokens and maps it to ids and position values.
pub fn encode_example(ex: &Example, vocab: &Vocab, n: usize) -> Result<Instance, DataError> {
    let (start, end) = truncation_window(ex.tokens.len(), ex.span, n)?;
    let tokens: Vec<usize> = ex.tokens[start..end].iter().map(|t| vocab.id(t)).collect();
    let positions = encode_positions(tokens.len(), ex.span.0 - start, ex.span.1 - start)
        .expect("window keeps the span")
        .into_vec();
    Ok(Instance { tokens, positions })
}

/// Fixed-width mini-batch. Rows are padded to `max_len` with the padding id;
/// padded position ids are clamped to `max_len`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Batch {
    pub max_len: usize,
    pub tokens: Vec<Vec<usize>>,
    pub positions: Vec<Vec<usize>>,
    pub mask: Vec<Vec<bool>>,
    pub labels: Vec<usize>,
}

impl Batch {
    pub fn from_instances(items: &[(Instance, usize)], max_len: usize) -> Self {
        let mut b = Batch {
            max_len,
            tokens: Vec::with_capacity(items.len()),
            positions: Vec::with_capacity(items.len()),
            mask: Vec::with_capacity(items.len()),
            labels: Vec::with_capacity(items.len()),
        };
        for (inst, label) in items {
            let len = inst.len();
            let mut t = inst.tokens.clone();
            t.resize(max_len, PAD_ID);
            let mut p = inst.positions.clone();
            p.resize(max_len, max_len);
            let mut m = vec![true; len];
            m.resize(max_len, false);
            b.tokens.push(t);
            b.positions.push(p);
            b.mask.push(m);
            b.labels.push(*label);
        }
        b
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Unpadded row `i`.
    pub fn instance(&self, i: usize) -> Instance {
        let len = self.mask[i].iter().take_while(|&&m| m).count();
        Instance {
            tokens: self.tokens[i][..len].to_vec(),
            positions: self.positions[i][..len].to_vec(),
        }
    }
}

/// Encodes `examples` and groups them into batches of `batch_size`; the
/// last batch may be smaller. With `shuffle` the order is permuted by `rng`.
pub fn make_batches<R: Rng + ?Sized>(
    examples: &[Example],
    vocab: &Vocab,
    max_len: usize,
    batch_size: usize,
    rng: &mut R,
    shuffle: bool,
) -> Result<Vec<Batch>, DataError> {
    if examples.is_empty() {
        return Err(DataError::Empty);
    }
    assert!(batch_size > 0, "batch size must be positive");
    let mut order: Vec<usize> = (0..examples.len()).collect();
    if shuffle {
        order.shuffle(rng);
    }
    let encoded = order
        .iter()
        .map(|&i| {
            Ok((
                encode_example(&examples[i], vocab, max_len)?,
                examples[i].label.index(),
            ))
        })
        .collect::<Result<Vec<_>, DataError>>()?;
    Ok(encoded
        .chunks(batch_size)
        .map(|c| Batch::from_instances(c, max_len))
        .collect())
}
