use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{DecaySpec, ModelError};

/// Which network a [`ModelConfig`](super::ModelConfig) describes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// Position-aware attention plus decay weighting.
    Pdn,
    /// Sum of word embeddings; blind to order and aspect.
    Nbow,
    /// Final LSTM state; blind to the aspect.
    Lstm,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Pdn => "pdn",
            ModelKind::Nbow => "nbow",
            ModelKind::Lstm => "lstm",
        })
    }
}

impl FromStr for ModelKind {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "pdn" => Ok(ModelKind::Pdn),
            "nbow" => Ok(ModelKind::Nbow),
            "lstm" => Ok(ModelKind::Lstm),
            other => Err(ModelError::UnknownModel(other.to_string())),
        }
    }
}

/// Architecture hyperparameters. Defaults follow the reference setup:
/// 300-d words, 25-d positions, 100 LSTM units, 50+50 attention
/// projections, a 64-unit penultimate layer with dropout 0.5, and sentences
/// capped at 80 tokens.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub vocab_size: usize,
    pub classes: usize,
    pub word_dim: usize,
    pub position_dim: usize,
    pub hidden_dim: usize,
    /// Units of the SELU projection of position embeddings.
    pub pan_position_hidden: usize,
    /// Units of the SELU projection of LSTM states.
    pub pan_sequence_hidden: usize,
    /// Units of the ReLU layer that scores each time step.
    pub attention_hidden: usize,
    pub penultimate: usize,
    pub max_len: usize,
    pub dropout: f64,
    pub decay: DecaySpec,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            kind: ModelKind::Pdn,
            vocab_size: 2,
            classes: 3,
            word_dim: 300,
            position_dim: 25,
            hidden_dim: 100,
            pan_position_hidden: 50,
            pan_sequence_hidden: 50,
            attention_hidden: 50,
            penultimate: 64,
            max_len: 80,
            dropout: 0.5,
            decay: DecaySpec::default(),
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let dims = [
            ("vocab_size", self.vocab_size),
            ("classes", self.classes),
            ("word_dim", self.word_dim),
            ("position_dim", self.position_dim),
            ("hidden_dim", self.hidden_dim),
            ("pan_position_hidden", self.pan_position_hidden),
            ("pan_sequence_hidden", self.pan_sequence_hidden),
            ("attention_hidden", self.attention_hidden),
            ("penultimate", self.penultimate),
            ("max_len", self.max_len),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(ModelError::BadConfig(format!("{name} must be positive")));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(ModelError::BadConfig(format!(
                "dropout {} outside [0, 1)",
                self.dropout
            )));
        }
        Ok(())
    }

    /// Number of trainable scalars implied by the configuration.
    pub fn parameter_count(&self) -> usize {
        let (v, dw, dp, dh) = (
            self.vocab_size,
            self.word_dim,
            self.position_dim,
            self.hidden_dim,
        );
        let embeddings = v * dw;
        let lstm = 4 * dh * (dw + dh) + 4 * dh;
        let head = self.penultimate * dh
            + self.penultimate
            + self.classes * self.penultimate
            + self.classes;
        match self.kind {
            ModelKind::Pdn => {
                let positions = self.max_len * dp;
                let (hp, hs, ha) = (
                    self.pan_position_hidden,
                    self.pan_sequence_hidden,
                    self.attention_hidden,
                );
                let pan = hp * dp + hp + hs * dh + hs + ha * (hp + hs) + ha + ha;
                embeddings + positions + lstm + pan + head
            }
            ModelKind::Lstm => embeddings + lstm + head,
            ModelKind::Nbow => {
                embeddings
                    + self.penultimate * dw
                    + self.penultimate
                    + self.classes * self.penultimate
                    + self.classes
            }
        }
    }
}
