use std::fmt;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{derive_seed, streams, TrainConfig};
use super::eval::evaluate;
use super::TrainError;
use crate::data::{make_batches, Example, Vocab};
use crate::exec::map_ordered;
use crate::model::{Model, ModelError, WORD_EMBEDDING};
use crate::numeric::{adam_step, AdamState, Gradients};

#[derive(Clone, Debug, PartialEq)]
pub struct EpochReport {
    /// 1-based.
    pub epoch: usize,
    pub loss: f64,
    /// Accuracy of the dropout-perturbed training forward passes.
    pub train_accuracy: f64,
    pub eval_accuracy: Option<f64>,
    pub seconds: f64,
}

impl EpochReport {
    /// The report without its wall-clock field; stable across identical runs.
    pub fn deterministic_line(&self) -> String {
        let eval = self
            .eval_accuracy
            .map_or_else(|| "na".to_string(), |a| format!("{a:.6}"));
        format!(
            "epoch={} loss={:.9} train_acc={:.6} eval_acc={}",
            self.epoch, self.loss, self.train_accuracy, eval
        )
    }
}

impl fmt::Display for EpochReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} time_s={:.3}",
            self.deterministic_line(),
            self.seconds
        )
    }
}

pub struct TrainOutcome {
    pub model: Model<f32>,
    pub reports: Vec<EpochReport>,
}

impl TrainOutcome {
    pub fn final_eval_accuracy(&self) -> Option<f64> {
        self.reports.last().and_then(|r| r.eval_accuracy)
    }

    /// Highest eval accuracy over all epochs, with its epoch.
    pub fn best_eval_accuracy(&self) -> Option<(usize, f64)> {
        self.reports
            .iter()
            .filter_map(|r| r.eval_accuracy.map(|a| (r.epoch, a)))
            .fold(None, |best, cur| match best {
                Some((_, b)) if b >= cur.1 => best,
                _ => Some(cur),
            })
    }
}

/// Loss, predicted class index and gradients of one training example.
type ExampleStep = (f32, usize, Gradients<f32>);

fn first_non_finite_param(model: &Model<f32>) -> Option<&str> {
    model
        .params
        .iter()
        .find(|(_, _, t)| !t.is_finite())
        .map(|(_, name, _)| name)
}

/// Builds a fresh model for `config` from the seed's init stream.
pub fn init_model(config: &TrainConfig) -> Result<Model<f32>, ModelError> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &[streams::INIT]));
    Model::init(config.model.clone(), &mut rng)
}

/// Mini-batch training with cross-entropy loss (mean over the batch) and Adam.
///
/// Per-example gradients may be computed in parallel; they are summed in
/// batch order so the run is bitwise reproducible for a given seed.
pub fn train(
    train_set: &[Example],
    eval_set: Option<&[Example]>,
    vocab: &Vocab,
    config: &TrainConfig,
    initial: Option<Model<f32>>,
    mut on_epoch: impl FnMut(&EpochReport),
) -> Result<TrainOutcome, TrainError> {
    if train_set.is_empty() {
        return Err(TrainError::Data(crate::data::DataError::Empty));
    }
    let mut model = match initial {
        Some(m) => m,
        None => init_model(config)?,
    };
    let mut adam = AdamState::new(&model.params, config.adam);
    if config.freeze_embeddings {
        adam.freeze(model.params.id(WORD_EMBEDDING).map_err(ModelError::from)?);
    }
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &[streams::SHUFFLE]));
    let mut grad_acc = model.params.zeros_like();
    let mut reports = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        let started = Instant::now();
        let batches = make_batches(
            train_set,
            vocab,
            config.model.max_len,
            config.batch_size,
            &mut shuffle_rng,
            true,
        )?;
        let (mut loss_sum, mut correct) = (0.0f64, 0usize);

        for (b, batch) in batches.iter().enumerate() {
            let rows: Vec<usize> = (0..batch.len()).collect();
            let model_ref = &model;
            let results: Vec<Result<ExampleStep, ModelError>> =
                map_ordered(&rows, config.execution, |_, &i| {
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
                        config.seed,
                        &[streams::DROPOUT, epoch as u64, b as u64, i as u64],
                    ));
                    model_ref.loss_and_grad(&batch.instance(i), batch.labels[i], Some(&mut rng))
                });

            grad_acc.iter_mut().for_each(|g| g.data_mut().fill(0.0));
            let scale = 1.0 / batch.len() as f32;
            for (i, r) in results.into_iter().enumerate() {
                let (loss, predicted, grads) = r?;
                let culprit = if !loss.is_finite() {
                    Some(first_non_finite_param(&model).unwrap_or("loss").to_string())
                } else {
                    grads
                        .first_non_finite()
                        .map(|id| model.params.name(id).to_string())
                };
                if let Some(tensor) = culprit {
                    return Err(TrainError::NonFinite {
                        epoch,
                        batch: b + 1,
                        tensor,
                    });
                }
                loss_sum += loss as f64;
                correct += usize::from(predicted == batch.labels[i]);
                grads.accumulate_into(&mut grad_acc, scale);
            }
            adam_step(&mut model.params, &grad_acc, &mut adam).map_err(ModelError::from)?;
            if let Some(name) = first_non_finite_param(&model) {
                return Err(TrainError::NonFinite {
                    epoch,
                    batch: b + 1,
                    tensor: name.to_string(),
                });
            }
        }

        let eval_accuracy = match eval_set {
            Some(set) if !set.is_empty() => Some(evaluate(set, &model, vocab, config.execution)?),
            _ => None,
        };
        let report = EpochReport {
            epoch,
            loss: loss_sum / train_set.len() as f64,
            train_accuracy: correct as f64 / train_set.len() as f64,
            eval_accuracy,
            seconds: started.elapsed().as_secs_f64(),
        };
        on_epoch(&report);
        reports.push(report);
    }
    Ok(TrainOutcome { model, reports })
}
