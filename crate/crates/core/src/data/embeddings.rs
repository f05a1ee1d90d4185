//! Pretrained word vectors in whitespace-separated text form.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use log::{info, warn};

use super::{DataError, Vocab};
use crate::numeric::{Scalar, Tensor};

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EmbeddingReport {
    /// Vocabulary entries copied from the file.
    pub found: usize,
    /// Vocabulary entries (excluding padding and unknown) left at zero.
    pub missing: usize,
    /// Repeated file entries that were ignored.
    pub duplicates: usize,
}

/// Builds a `[vocab, dim]` table from a `token v1 ... v_dim` file. Rows of
/// tokens absent from the file, including padding and unknown, are zero.
/// On duplicate entries the first occurrence wins.
pub fn load_embeddings<T: Scalar>(
    path: &Path,
    vocab: &Vocab,
    dim: usize,
) -> Result<(Tensor<T>, EmbeddingReport), DataError> {
    let file = File::open(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_embeddings(BufReader::new(file), vocab, dim)
}

pub fn read_embeddings<T: Scalar, R: BufRead>(
    reader: R,
    vocab: &Vocab,
    dim: usize,
) -> Result<(Tensor<T>, EmbeddingReport), DataError> {
    let mut table = Tensor::zeros(&[vocab.len(), dim]);
    let mut seen = HashSet::new();
    let mut report = EmbeddingReport::default();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|source| DataError::Io {
            path: "<embeddings>".into(),
            source,
        })?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        // optional word2vec-style "count dim" header
        if lineno == 1 && fields.len() == 2 && fields.iter().all(|f| f.parse::<usize>().is_ok()) {
            continue;
        }
        if fields.len() < dim + 1 {
            return Err(DataError::EmbeddingDim {
                line: lineno,
                expected: dim,
                found: fields.len() - 1,
            });
        }
        // tokens may themselves contain spaces; the last `dim` fields are the vector
        let split = fields.len() - dim;
        let values: Result<Vec<f64>, _> =
            fields[split..].iter().map(|f| f.parse::<f64>()).collect();
        let values = match values {
            Ok(v) if split == 1 || fields[1].parse::<f64>().is_err() => v,
            _ => {
                return Err(DataError::EmbeddingDim {
                    line: lineno,
                    expected: dim,
                    found: fields.len() - 1,
                })
            }
        };
        let token = fields[..split].join(" ");
        let Some(id) = vocab.get(&token) else {
            continue;
        };
        if !seen.insert(id) {
            warn!("embedding line {lineno}: duplicate entry for {token:?} ignored");
            report.duplicates += 1;
            continue;
        }
        for (dst, v) in table.row_mut(id).iter_mut().zip(values) {
            *dst = T::of(v);
        }
        report.found += 1;
    }
    let reserved = [super::vocab::PAD_ID, super::vocab::UNK_ID];
    report.missing = (0..vocab.len())
        .filter(|id| !reserved.contains(id) && !seen.contains(id))
        .count();
    info!(
        "embeddings: {} found, {} missing, {} duplicates",
        report.found, report.missing, report.duplicates
    );
    Ok((table, report))
}
