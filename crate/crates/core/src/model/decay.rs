//! Parameter-free decay functions applied to relative positions.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ModelError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecayKind {
    /// `λ / x`
    Inverse,
    /// `exp(-λx)`
    Exponential,
    /// `1 - tanh(λx)`
    Tangent,
}

impl DecayKind {
    /// Constant used for each kind in the reference experiments.
    pub fn default_lambda(self) -> f64 {
        match self {
            DecayKind::Inverse => 1.1333,
            DecayKind::Exponential => 0.3,
            DecayKind::Tangent => 0.45,
        }
    }

    pub const ALL: [DecayKind; 3] = [
        DecayKind::Inverse,
        DecayKind::Exponential,
        DecayKind::Tangent,
    ];
}

impl fmt::Display for DecayKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DecayKind::Inverse => "inverse",
            DecayKind::Exponential => "expo",
            DecayKind::Tangent => "tangent",
        })
    }
}

impl FromStr for DecayKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "inverse" | "inv" => Ok(DecayKind::Inverse),
            "expo" | "exp" | "exponential" => Ok(DecayKind::Exponential),
            "tangent" | "tan" | "tanh" => Ok(DecayKind::Tangent),
            other => Err(ModelError::UnknownDecay(other.to_string())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecaySpec {
    kind: DecayKind,
    lambda: f64,
}

impl DecaySpec {
    pub fn new(kind: DecayKind, lambda: f64) -> Result<Self, ModelError> {
        let ok = lambda.is_finite()
            && match kind {
                DecayKind::Inverse => lambda > 0.0,
                _ => lambda >= 0.0,
            };
        if !ok {
            return Err(ModelError::BadLambda { kind, lambda });
        }
        Ok(Self { kind, lambda })
    }

    pub fn with_default_lambda(kind: DecayKind) -> Self {
        Self {
            kind,
            lambda: kind.default_lambda(),
        }
    }

    pub fn kind(&self) -> DecayKind {
        self.kind
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Decay weight for a position value.
    pub fn weight(&self, x: f64) -> Result<f64, ModelError> {
        let l = self.lambda;
        match self.kind {
            DecayKind::Inverse if x == 0.0 => Err(ModelError::SingularDecay),
            DecayKind::Inverse => Ok(l / x),
            DecayKind::Exponential => Ok((-l * x).exp()),
            // 1 − tanh(y) = 2 / (e^{2y} + 1), which keeps precision once tanh saturates
            DecayKind::Tangent => Ok(2.0 / ((2.0 * l * x).exp() + 1.0)),
        }
    }
}

impl Default for DecaySpec {
    fn default() -> Self {
        Self::with_default_lambda(DecayKind::Inverse)
    }
}

impl fmt::Display for DecaySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(λ={})", self.kind, self.lambda)
    }
}
