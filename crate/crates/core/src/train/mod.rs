//! Training loop, evaluation, attention inspection and whole-model
//! gradient checking.

mod config;
mod eval;
mod gradcheck;
mod trainer;

pub use config::{derive_seed, streams, TrainConfig};
pub use eval::{
    attention_dump, evaluate, majority_baseline, predict_example, AttentionDump, TokenWeight,
};
pub use gradcheck::{model_gradient_check, GradcheckOptions, GradcheckReport, TensorCheck};
pub use trainer::{init_model, train, EpochReport, TrainOutcome};

use thiserror::Error;

use crate::data::DataError;
use crate::model::ModelError;
use crate::numeric::NumericError;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error("non-finite value in {tensor} at epoch {epoch}, batch {batch}")]
    NonFinite {
        epoch: usize,
        batch: usize,
        tensor: String,
    },
    #[error("cannot evaluate on an empty set")]
    EmptyEval,
}

impl TrainError {
    /// Whether the failure is numerical rather than caused by the input data.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            TrainError::Numeric(_)
                | TrainError::NonFinite { .. }
                | TrainError::Model(ModelError::Numeric(_))
                | TrainError::Model(ModelError::SingularDecay)
        )
    }
}
