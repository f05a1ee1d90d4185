use serde::{Deserialize, Serialize};

use crate::exec::Execution;
use crate::model::ModelConfig;
use crate::numeric::AdamConfig;

/// Training hyperparameters. Defaults: batch 20, 30 epochs, Adam with
/// learning rate 0.001, trainable word embeddings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub batch_size: usize,
    pub epochs: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    pub freeze_embeddings: bool,
    pub execution: Execution,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            batch_size: 20,
            epochs: 30,
            adam: AdamConfig::default(),
            seed: 0,
            freeze_embeddings: false,
            execution: Execution::default(),
        }
    }
}

/// SplitMix64 finaliser; derives independent stream seeds from one seed.
pub fn derive_seed(seed: u64, parts: &[u64]) -> u64 {
    let mut x = seed;
    for &p in parts {
        x = x.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(p);
        let mut z = x;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        x = z ^ (z >> 31);
    }
    x
}

/// Stream identifiers for [`derive_seed`].
pub mod streams {
    pub const INIT: u64 = 1;
    pub const SHUFFLE: u64 = 2;
    pub const DROPOUT: u64 = 3;
}
