//! Dataset readers, tokenisation, vocabulary, embeddings, batching and the
//! synthetic position-sensitive task.

mod batch;
mod embeddings;
mod example;
mod semeval;
pub mod synth;
mod tokenize;
mod tsv;
pub mod vocab;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use batch::{encode_example, make_batches, truncation_window, Batch};
pub use embeddings::{load_embeddings, read_embeddings, EmbeddingReport};
pub use example::{Example, LabelCounts, Sentiment};
pub use semeval::{parse_semeval_str, parse_semeval_xml};
pub use synth::{oracle_label, synth_generate, DistanceProfile};
pub use tokenize::{covering_tokens, find_phrase, tokenize, tokenize_with_offsets, Token};
pub use tsv::{parse_tsv, parse_tsv_str, to_tsv};
pub use vocab::Vocab;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("XML error at line {line}: {message}")]
    Xml { line: usize, message: String },
    #[error("TSV error at line {line}: {message}")]
    Tsv { line: usize, message: String },
    #[error("line {line}: unknown label {label:?}")]
    UnknownLabel { line: usize, label: String },
    #[error("line {line}: aspect {aspect:?} not found in sentence")]
    AspectNotFound { line: usize, aspect: String },
    #[error("embedding line {line}: expected {expected} values, found {found}")]
    EmbeddingDim {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("aspect span of {span_len} tokens exceeds maximum length {max_len}")]
    SpanTooLong { span_len: usize, max_len: usize },
    #[error("invalid example: {0}")]
    BadExample(String),
    #[error("invalid vocabulary: {0}")]
    BadVocab(String),
    #[error("no examples")]
    Empty,
    #[error("unrecognised data format for {0}; use .xml or .tsv")]
    UnknownFormat(PathBuf),
}

pub(crate) fn read_file(path: &Path) -> Result<String, DataError> {
    std::fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Data file formats understood by [`load_examples`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    SemevalXml,
    Tsv,
}

impl Format {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "xml" => Some(Format::SemevalXml),
            "tsv" | "txt" => Some(Format::Tsv),
            _ => None,
        }
    }
}

/// Reads examples, choosing the parser from `format` or the file extension.
pub fn load_examples(path: &Path, format: Option<Format>) -> Result<Vec<Example>, DataError> {
    match format.or_else(|| Format::from_path(path)) {
        Some(Format::SemevalXml) => parse_semeval_xml(path),
        Some(Format::Tsv) => parse_tsv(path),
        None => Err(DataError::UnknownFormat(path.to_path_buf())),
    }
}
