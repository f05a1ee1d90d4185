//! Binary checkpoint files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "PDN1"                 magic
//! u32                    format version
//! u32 + UTF-8            config blob (JSON)
//! u32 + UTF-8            vocabulary, one token per line
//! u32                    tensor count
//! per tensor:
//!   u32 + UTF-8          name
//!   u32                  rank
//!   u32 × rank           dims
//!   f32 × product(dims)  values
//! ```

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Model, ModelConfig, ModelError};
use crate::data::{DataError, Vocab};
use crate::numeric::{ParamStore, Tensor};

pub const MAGIC: &[u8; 4] = b"PDN1";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad magic bytes {found:?} at offset 0")]
    BadMagic { found: Vec<u8> },
    #[error("unsupported format version {version} at offset 4")]
    BadVersion { version: u32 },
    #[error("truncated checkpoint: needed {needed} bytes at offset {offset}, file has {len}")]
    Truncated {
        offset: usize,
        needed: usize,
        len: usize,
    },
    #[error("invalid UTF-8 in {what} at offset {offset}")]
    Utf8 { what: &'static str, offset: usize },
    #[error("bad config blob at offset {offset}: {message}")]
    Config { offset: usize, message: String },
    #[error("{0} trailing bytes after last tensor")]
    Trailing(usize),
    #[error(transparent)]
    Vocab(#[from] DataError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Serialize, Deserialize)]
struct ConfigBlob {
    model: ModelConfig,
    seed: u64,
}

/// Everything needed to restore a trained model.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: Model<f32>,
    pub vocab: Vocab,
    pub seed: u64,
}

fn put_bytes(buf: &mut Vec<u8>, bytes: &[u8]) {
    buf.extend_from_slice(&(bytes.len() as u32).to_le_bytes());
    buf.extend_from_slice(bytes);
}

pub fn encode_checkpoint(model: &Model<f32>, vocab: &Vocab, seed: u64) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    let blob = ConfigBlob {
        model: model.config.clone(),
        seed,
    };
    put_bytes(
        &mut buf,
        serde_json::to_string(&blob)
            .expect("serialisable")
            .as_bytes(),
    );
    put_bytes(&mut buf, vocab.to_text().as_bytes());
    buf.extend_from_slice(&(model.params.len() as u32).to_le_bytes());
    for (_, name, t) in model.params.iter() {
        put_bytes(&mut buf, name.as_bytes());
        buf.extend_from_slice(&(t.rank() as u32).to_le_bytes());
        for &d in t.dims() {
            buf.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in t.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    buf
}

/// Writes atomically: the data goes to a temporary file in the target
/// directory which is renamed into place on success.
pub fn save_checkpoint(
    model: &Model<f32>,
    vocab: &Vocab,
    seed: u64,
    path: &Path,
) -> Result<(), CheckpointError> {
    let io = |source| CheckpointError::Io {
        path: path.to_path_buf(),
        source,
    };
    if path.metadata().is_ok_and(|m| !m.is_file()) {
        return Err(io(std::io::Error::new(
            std::io::ErrorKind::InvalidInput,
            "not a regular file",
        )));
    }
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(&encode_checkpoint(model, vocab, seed))
        .map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        if self.buf.len() - self.pos < n {
            return Err(CheckpointError::Truncated {
                offset: self.pos,
                needed: n,
                len: self.buf.len(),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn string(&mut self, what: &'static str) -> Result<&'a str, CheckpointError> {
        let len = self.u32()? as usize;
        let offset = self.pos;
        std::str::from_utf8(self.take(len)?).map_err(|_| CheckpointError::Utf8 { what, offset })
    }
}

pub fn decode_checkpoint(buf: &[u8]) -> Result<Checkpoint, CheckpointError> {
    let mut r = Reader { buf, pos: 0 };
    let magic = r.take(4).map_err(|_| CheckpointError::BadMagic {
        found: buf.to_vec(),
    })?;
    if magic != MAGIC {
        return Err(CheckpointError::BadMagic {
            found: magic.to_vec(),
        });
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(CheckpointError::BadVersion { version });
    }
    let config_offset = r.pos;
    let blob: ConfigBlob =
        serde_json::from_str(r.string("config")?).map_err(|e| CheckpointError::Config {
            offset: config_offset,
            message: e.to_string(),
        })?;
    let vocab = Vocab::from_text(r.string("vocabulary")?)?;
    let count = r.u32()? as usize;
    let mut params = ParamStore::new();
    for _ in 0..count {
        let name = r.string("tensor name")?.to_string();
        let rank = r.u32()? as usize;
        let dims = (0..rank)
            .map(|_| r.u32().map(|d| d as usize))
            .collect::<Result<Vec<_>, _>>()?;
        let len: usize = dims.iter().product();
        let offset = r.pos;
        let raw = r.take(len.checked_mul(4).ok_or(CheckpointError::Truncated {
            offset,
            needed: usize::MAX,
            len: buf.len(),
        })?)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let t = Tensor::new(dims, data).map_err(|e| CheckpointError::Config {
            offset,
            message: format!("tensor {name}: {e}"),
        })?;
        if params.find(&name).is_some() {
            return Err(CheckpointError::Config {
                offset,
                message: format!("duplicate tensor {name}"),
            });
        }
        params.insert(&name, t);
    }
    if r.pos != buf.len() {
        return Err(CheckpointError::Trailing(buf.len() - r.pos));
    }
    if vocab.len() != blob.model.vocab_size {
        return Err(CheckpointError::Config {
            offset: config_offset,
            message: format!(
                "config vocab_size {} but vocabulary has {} entries",
                blob.model.vocab_size,
                vocab.len()
            ),
        });
    }
    let model = Model::from_parts(blob.model, params)?;
    Ok(Checkpoint {
        model,
        vocab,
        seed: blob.seed,
    })
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, CheckpointError> {
    let buf = std::fs::read(path).map_err(|source| CheckpointError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_checkpoint(&buf)
}
