//! The PDN architecture: relative position encoding, decay functions, the
//! LSTM encoder with position-aware attention, decay weighting, the
//! classifier head, positionless baselines and checkpoint files.

pub mod checkpoint;
mod config;
mod decay;
mod network;
mod position;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointError};
pub use config::{ModelConfig, ModelKind};
pub use decay::{DecayKind, DecaySpec};
pub use network::*;
pub use position::{encode_positions, PositionEncoding};

use thiserror::Error;

use crate::numeric::NumericError;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error("aspect span [{start}, {end}] invalid for a sentence of {len} tokens")]
    BadSpan {
        len: usize,
        start: usize,
        end: usize,
    },
    #[error("singular decay input")]
    SingularDecay,
    #[error("decay constant {lambda} not allowed for {kind} decay")]
    BadLambda { kind: DecayKind, lambda: f64 },
    #[error("unknown decay kind {0:?}")]
    UnknownDecay(String),
    #[error("unknown model kind {0:?}")]
    UnknownModel(String),
    #[error("invalid model configuration: {0}")]
    BadConfig(String),
    #[error("empty input sentence")]
    EmptyInput,
    #[error("{tokens} tokens but {positions} position values")]
    LengthMismatch { tokens: usize, positions: usize },
    #[error("token id {id} outside vocabulary of {vocab}")]
    TokenOutOfRange { id: usize, vocab: usize },
    #[error("position value {0} must be at least 1")]
    BadPosition(usize),
}
