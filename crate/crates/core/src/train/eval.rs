use std::fmt;

use super::TrainError;
use crate::data::{encode_example, truncation_window, Example, LabelCounts, Sentiment, Vocab};
use crate::exec::{map_ordered, Execution};
use crate::model::{ForwardTrace, Model};

/// Fraction of `examples` whose predicted class equals the gold label.
pub fn evaluate(
    examples: &[Example],
    model: &Model<f32>,
    vocab: &Vocab,
    exec: Execution,
) -> Result<f64, TrainError> {
    if examples.is_empty() {
        return Err(TrainError::EmptyEval);
    }
    let hits = map_ordered(examples, exec, |_, ex| -> Result<bool, TrainError> {
        let inst = encode_example(ex, vocab, model.config.max_len)?;
        Ok(model.predict(&inst)? == ex.label.index())
    });
    let mut correct = 0usize;
    for h in hits {
        correct += usize::from(h?);
    }
    Ok(correct as f64 / examples.len() as f64)
}

/// Accuracy on `test` of always predicting the most frequent training label.
/// Ties go to the lowest class index.
pub fn majority_baseline(
    train: &[Example],
    test: &[Example],
) -> Result<(Sentiment, f64), TrainError> {
    if test.is_empty() {
        return Err(TrainError::EmptyEval);
    }
    let counts = LabelCounts::of(train);
    let per_class = [counts.negative, counts.neutral, counts.positive];
    let best = (0..per_class.len()).fold(0, |b, i| if per_class[i] > per_class[b] { i } else { b });
    let label = Sentiment::from_index(best).expect("three classes");
    let hits = test.iter().filter(|e| e.label == label).count();
    Ok((label, hits as f64 / test.len() as f64))
}

pub fn predict_example(
    model: &Model<f32>,
    vocab: &Vocab,
    ex: &Example,
) -> Result<ForwardTrace<f32>, TrainError> {
    let inst = encode_example(ex, vocab, model.config.max_len)?;
    Ok(model.forward(&inst)?)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TokenWeight {
    pub token: String,
    pub position: usize,
    pub decay: f64,
    pub alpha: f64,
    /// `alpha · decay`: the weight the token's hidden state actually receives.
    pub effective: f64,
}

/// Per-token attention and decay for one sentence.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionDump {
    pub aspect: String,
    pub predicted: Sentiment,
    pub probs: Vec<f64>,
    pub tokens: Vec<TokenWeight>,
}

impl AttentionDump {
    /// Index of the token with the largest effective weight.
    pub fn top_effective(&self) -> Option<usize> {
        (0..self.tokens.len()).fold(None, |best, i| match best {
            Some(b) if self.tokens[b].effective >= self.tokens[i].effective => Some(b),
            _ => Some(i),
        })
    }
}

impl fmt::Display for AttentionDump {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "aspect={:?} predicted={} p_negative={:.6} p_neutral={:.6} p_positive={:.6}",
            self.aspect, self.predicted, self.probs[0], self.probs[1], self.probs[2]
        )?;
        for (i, t) in self.tokens.iter().enumerate() {
            writeln!(
                f,
                "index={} token={:?} position={} decay={:.6} alpha={:.6} effective={:.6}",
                i, t.token, t.position, t.decay, t.alpha, t.effective
            )?;
        }
        Ok(())
    }
}

/// Forward pass that exposes attention weights. Only PDN models attend;
/// other kinds yield an empty token list.
pub fn attention_dump(
    model: &Model<f32>,
    vocab: &Vocab,
    ex: &Example,
) -> Result<AttentionDump, TrainError> {
    let n = model.config.max_len;
    let (start, end) = truncation_window(ex.tokens.len(), ex.span, n)?;
    let inst = encode_example(ex, vocab, n)?;
    let trace = model.forward(&inst)?;
    let tokens = match &trace.alpha {
        Some(alpha) => ex.tokens[start..end]
            .iter()
            .zip(&inst.positions)
            .zip(alpha.iter().zip(&trace.decay))
            .map(|((tok, &p), (&a, &d))| TokenWeight {
                token: tok.clone(),
                position: p,
                decay: d,
                alpha: a as f64,
                effective: a as f64 * d,
            })
            .collect(),
        None => Vec::new(),
    };
    Ok(AttentionDump {
        aspect: ex.aspect_text(),
        predicted: Sentiment::from_index(trace.predicted()).expect("three classes"),
        probs: trace.probs.iter().map(|&p| p as f64).collect(),
        tokens,
    })
}
