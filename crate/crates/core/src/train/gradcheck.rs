use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{derive_seed, streams};
use crate::model::{
    encode_positions, DecaySpec, Faults, Instance, Model, ModelConfig, ModelError, ModelKind,
};
use crate::numeric::{finite_difference_grad, relative_error, Tensor};

/// Settings for [`model_gradient_check`]. The network is deliberately tiny
/// so that every parameter can be probed by finite differences.
#[derive(Clone, Debug)]
pub struct GradcheckOptions {
    pub seed: u64,
    /// Sentence length; also the position table size.
    pub length: usize,
    pub kind: ModelKind,
    pub decay: DecaySpec,
    pub faults: Faults,
    pub step: f64,
    pub tolerance: f64,
}

impl Default for GradcheckOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            length: 8,
            kind: ModelKind::Pdn,
            decay: DecaySpec::default(),
            faults: Faults::default(),
            step: 1e-6,
            tolerance: 1e-4,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TensorCheck {
    pub name: String,
    pub elements: usize,
    pub worst_relative_error: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradcheckReport {
    pub tensors: Vec<TensorCheck>,
    pub tolerance: f64,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.tensors.iter().all(|t| t.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &TensorCheck> {
        self.tensors.iter().filter(|t| !t.passed)
    }
}

impl fmt::Display for GradcheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for t in &self.tensors {
            writeln!(
                f,
                "tensor={} elements={} worst_rel_err={:.3e} status={}",
                t.name,
                t.elements,
                t.worst_relative_error,
                if t.passed { "ok" } else { "FAIL" }
            )?;
        }
        write!(
            f,
            "gradcheck={} tolerance={:.0e}",
            if self.passed() { "pass" } else { "fail" },
            self.tolerance
        )
    }
}

/// Compares analytic gradients of a small double-precision model with
/// central finite differences, tensor by tensor. Dropout stays active with
/// a mask that is identical for every evaluation.
pub fn model_gradient_check(opts: &GradcheckOptions) -> Result<GradcheckReport, ModelError> {
    if opts.length == 0 {
        return Err(ModelError::EmptyInput);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(opts.seed, &[streams::INIT]));
    let vocab_size = 12;
    let config = ModelConfig {
        kind: opts.kind,
        vocab_size,
        word_dim: 8,
        position_dim: 4,
        hidden_dim: 6,
        pan_position_hidden: 5,
        pan_sequence_hidden: 5,
        attention_hidden: 5,
        penultimate: 7,
        max_len: opts.length,
        decay: opts.decay,
        ..ModelConfig::default()
    };
    let mut model: Model<f64> = Model::init(config, &mut rng)?;
    model.faults = opts.faults;
    // Zero-initialised biases sit on ReLU kinks; nudge every tensor off them.
    for id in model.params.ids().collect::<Vec<_>>() {
        for v in model.params.get_mut(id).data_mut() {
            *v += rng.gen_range(-0.1..0.1);
        }
    }

    let n = opts.length;
    let start = rng.gen_range(1..=n);
    let end = rng.gen_range(start..=n.min(start + 1));
    let inst = Instance {
        tokens: (0..n).map(|_| rng.gen_range(0..vocab_size)).collect(),
        positions: encode_positions(n, start, end)?.into_vec(),
    };
    let label = rng.gen_range(0..model.config.classes);
    let dropout_seed = derive_seed(opts.seed, &[streams::DROPOUT]);

    let (_, _, grads) = model.loss_and_grad(
        &inst,
        label,
        Some(&mut ChaCha8Rng::seed_from_u64(dropout_seed)),
    )?;
    let mut tensors = Vec::new();
    for id in model.params.ids().collect::<Vec<_>>() {
        let analytic = grads.param_dense(id, &model.params);
        let original = model.params.get(id).clone();
        let mut probe = model.clone();
        let numeric = finite_difference_grad(
            |x: &Tensor<f64>| {
                *probe.params.get_mut(id) = x.clone();
                probe
                    .loss(
                        &inst,
                        label,
                        Some(&mut ChaCha8Rng::seed_from_u64(dropout_seed)),
                    )
                    .expect("forward succeeded once")
            },
            &original,
            opts.step,
        );
        let worst = analytic
            .data()
            .iter()
            .zip(numeric.data())
            .map(|(&a, &b)| relative_error(a, b))
            .fold(0.0f64, f64::max);
        tensors.push(TensorCheck {
            name: model.params.name(id).to_string(),
            elements: original.len(),
            worst_relative_error: worst,
            passed: worst <= opts.tolerance,
        });
    }
    Ok(GradcheckReport {
        tensors,
        tolerance: opts.tolerance,
    })
}
