//! Dense numeric kernel: tensors, a reverse-mode tape, initialisers, the
//! Adam optimiser and a finite-difference gradient oracle.

mod gradcheck;
mod init;
pub mod kernels;
mod optim;
mod params;
pub mod tape;
mod tensor;

pub use gradcheck::{finite_difference_grad, relative_error};
pub use init::{glorot_init, zeros_init};
pub use optim::{adam_step, AdamConfig, AdamState};
pub use params::{ParamId, ParamStore};
pub use tape::{act, cross_entropy, dropout, masked_softmax, Gradients, ParamGrad, Tape, Var};
pub use tensor::{Scalar, Tensor};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NumericError {
    #[error("dims {dims:?} do not describe {len} stored values")]
    BadShape { dims: Vec<usize>, len: usize },
    #[error("{op}: incompatible shapes {left:?} and {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("{0}: empty input")]
    Empty(&'static str),
    #[error("index {index} out of range for {bound} rows")]
    IndexOutOfRange { index: usize, bound: usize },
    #[error("empty attention support")]
    EmptyAttention,
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("dropout probability {0} outside [0, 1)")]
    InvalidProbability(f64),
    #[error("tape already consumed by a backward pass")]
    TapeConsumed,
    #[error("loss must be a scalar, got dims {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("unknown parameter {0}")]
    UnknownParam(String),
}
