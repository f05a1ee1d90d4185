//! Parameter layout and forward graphs for PDN and the two baselines.

use rand::{Rng, RngCore};

use super::{ModelConfig, ModelError, ModelKind};
use crate::data::vocab::{PAD_ID, UNK_ID};
use crate::numeric::{
    glorot_init, zeros_init, Gradients, ParamId, ParamStore, Scalar, Tape, Tensor, Var,
};

pub const WORD_EMBEDDING: &str = "word_embedding";
pub const POSITION_EMBEDDING: &str = "position_embedding";
pub const LSTM_W_IH: &str = "lstm.w_ih";
pub const LSTM_W_HH: &str = "lstm.w_hh";
pub const LSTM_BIAS: &str = "lstm.bias";
pub const PAN_W_P: &str = "pan.w_p";
pub const PAN_B_P: &str = "pan.b_p";
pub const PAN_W_H: &str = "pan.w_h";
pub const PAN_B_H: &str = "pan.b_h";
pub const PAN_W_A: &str = "pan.w_a";
pub const PAN_B_A: &str = "pan.b_a";
pub const PAN_V: &str = "pan.v";
pub const HEAD_W_O: &str = "head.w_o";
pub const HEAD_B_O: &str = "head.b_o";
pub const HEAD_W_Q: &str = "head.w_q";
pub const HEAD_B_Q: &str = "head.b_q";

/// One sentence ready for the network: vocabulary ids and position values
/// (1-based distances to the aspect), both unpadded.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    pub tokens: Vec<usize>,
    pub positions: Vec<usize>,
}

impl Instance {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Debug switches that alter the backward pass.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Faults {
    /// Drop the decay factor from the gradient of the decay weighting.
    pub break_decay_gradient: bool,
}

/// Handles into a built forward graph.
#[derive(Clone, Debug)]
pub struct Graph {
    pub probs: Var,
    pub logits: Var,
    pub pooled: Var,
    pub intermediate: Var,
    pub hidden: Option<Var>,
    pub alpha: Option<Var>,
    pub decayed: Option<Var>,
    pub decay: Vec<f64>,
}

/// Everything a forward pass computed for one sentence.
///
/// Per-token vectors cover the valid tokens only; padding never enters the
/// computation and so carries zero attention.
#[derive(Clone, Debug)]
pub struct ForwardTrace<T> {
    pub hidden: Option<Tensor<T>>,
    pub alpha: Option<Vec<T>>,
    pub decay: Vec<f64>,
    pub decayed: Option<Tensor<T>>,
    pub pooled: Tensor<T>,
    pub intermediate: Tensor<T>,
    pub logits: Tensor<T>,
    pub probs: Vec<T>,
}

impl<T: Scalar> ForwardTrace<T> {
    /// Index of the largest probability; ties go to the lowest index.
    pub fn predicted(&self) -> usize {
        argmax(&self.probs)
    }
}

pub fn argmax<T: Scalar>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model<T> {
    pub config: ModelConfig,
    pub params: ParamStore<T>,
    pub faults: Faults,
}

fn lstm_bias<T: Scalar>(hidden: usize) -> Tensor<T> {
    let mut b = zeros_init(&[4 * hidden]);
    // gate order i, f, g, o; forget gate starts open
    b.data_mut()[hidden..2 * hidden]
        .iter_mut()
        .for_each(|v| *v = T::one());
    b
}

impl<T: Scalar> Model<T> {
    /// Fresh model with Glorot-uniform matrices and zero biases.
    pub fn init<R: Rng + ?Sized>(config: ModelConfig, rng: &mut R) -> Result<Self, ModelError> {
        config.validate()?;
        let c = &config;
        let (dw, dp, dh) = (c.word_dim, c.position_dim, c.hidden_dim);
        let mut p = ParamStore::new();
        let mut words: Tensor<T> = glorot_init(&[c.vocab_size, dw], rng);
        for id in [PAD_ID, UNK_ID].into_iter().filter(|&id| id < c.vocab_size) {
            words.row_mut(id).fill(T::zero());
        }
        p.insert(WORD_EMBEDDING, words);
        if c.kind == ModelKind::Pdn {
            p.insert(POSITION_EMBEDDING, glorot_init(&[c.max_len, dp], rng));
        }
        if matches!(c.kind, ModelKind::Pdn | ModelKind::Lstm) {
            p.insert(LSTM_W_IH, glorot_init(&[4 * dh, dw], rng));
            p.insert(LSTM_W_HH, glorot_init(&[4 * dh, dh], rng));
            p.insert(LSTM_BIAS, lstm_bias(dh));
        }
        if c.kind == ModelKind::Pdn {
            let (hp, hs, ha) = (
                c.pan_position_hidden,
                c.pan_sequence_hidden,
                c.attention_hidden,
            );
            p.insert(PAN_W_P, glorot_init(&[hp, dp], rng));
            p.insert(PAN_B_P, zeros_init(&[hp]));
            p.insert(PAN_W_H, glorot_init(&[hs, dh], rng));
            p.insert(PAN_B_H, zeros_init(&[hs]));
            p.insert(PAN_W_A, glorot_init(&[ha, hs + hp], rng));
            p.insert(PAN_B_A, zeros_init(&[ha]));
            p.insert(PAN_V, glorot_init(&[ha], rng));
        }
        let head_in = if c.kind == ModelKind::Nbow { dw } else { dh };
        p.insert(HEAD_W_O, glorot_init(&[c.penultimate, head_in], rng));
        p.insert(HEAD_B_O, zeros_init(&[c.penultimate]));
        p.insert(HEAD_W_Q, glorot_init(&[c.classes, c.penultimate], rng));
        p.insert(HEAD_B_Q, zeros_init(&[c.classes]));
        Ok(Self {
            config,
            params: p,
            faults: Faults::default(),
        })
    }

    /// Rebuilds a model from stored tensors, checking every expected tensor
    /// is present with the configured shape.
    pub fn from_parts(config: ModelConfig, params: ParamStore<T>) -> Result<Self, ModelError> {
        let reference =
            Model::<T>::init(config.clone(), &mut rand::rngs::mock::StepRng::new(0, 1))?;
        if reference.params.len() != params.len() {
            return Err(ModelError::BadConfig(format!(
                "expected {} tensors, found {}",
                reference.params.len(),
                params.len()
            )));
        }
        for (_, name, t) in reference.params.iter() {
            let got = params
                .by_name(name)
                .ok_or_else(|| ModelError::BadConfig(format!("missing tensor {name}")))?;
            if got.dims() != t.dims() {
                return Err(ModelError::BadConfig(format!(
                    "tensor {name} has dims {:?}, expected {:?}",
                    got.dims(),
                    t.dims()
                )));
            }
        }
        Ok(Self {
            config,
            params,
            faults: Faults::default(),
        })
    }

    pub fn cast<U: Scalar>(&self) -> Model<U> {
        Model {
            config: self.config.clone(),
            params: self.params.cast(),
            faults: self.faults,
        }
    }

    pub fn kind(&self) -> ModelKind {
        self.config.kind
    }

    fn pid(&self, name: &str) -> ParamId {
        self.params.find(name).expect("layout fixed at init")
    }

    fn p<'p>(&'p self, tape: &mut Tape<'p, T>, name: &str) -> Var {
        tape.param(&self.params, self.pid(name))
    }

    fn check_instance(&self, inst: &Instance) -> Result<(), ModelError> {
        if inst.tokens.is_empty() {
            return Err(ModelError::EmptyInput);
        }
        if inst.tokens.len() != inst.positions.len() {
            return Err(ModelError::LengthMismatch {
                tokens: inst.tokens.len(),
                positions: inst.positions.len(),
            });
        }
        if let Some(&t) = inst.tokens.iter().find(|&&t| t >= self.config.vocab_size) {
            return Err(ModelError::TokenOutOfRange {
                id: t,
                vocab: self.config.vocab_size,
            });
        }
        if inst.positions.contains(&0) {
            return Err(ModelError::BadPosition(0));
        }
        Ok(())
    }

    /// Hidden state for every time step of a single-layer LSTM.
    fn lstm<'p>(&'p self, tape: &mut Tape<'p, T>, inputs: Var) -> Result<Vec<Var>, ModelError> {
        let d = self.config.hidden_dim;
        let w_ih = self.p(tape, LSTM_W_IH);
        let w_hh = self.p(tape, LSTM_W_HH);
        let bias = self.p(tape, LSTM_BIAS);
        let pre = tape.affine(inputs, w_ih, Some(bias))?;
        let steps = tape.value(pre).rows();
        let mut hs = Vec::with_capacity(steps);
        let mut state: Option<(Var, Var)> = None;
        for t in 0..steps {
            let mut z = tape.row(pre, t)?;
            if let Some((h, _)) = state {
                let rec = tape.affine(h, w_hh, None)?;
                z = tape.add(z, rec)?;
            }
            let i = tape.slice_cols(z, 0, d)?;
            let i = tape.sigmoid(i);
            let g = tape.slice_cols(z, 2 * d, d)?;
            let g = tape.tanh(g);
            let o = tape.slice_cols(z, 3 * d, d)?;
            let o = tape.sigmoid(o);
            let mut c = tape.mul(i, g)?;
            if let Some((_, c_prev)) = state {
                let f = tape.slice_cols(z, d, d)?;
                let f = tape.sigmoid(f);
                let keep = tape.mul(f, c_prev)?;
                c = tape.add(c, keep)?;
            }
            let tc = tape.tanh(c);
            let h = tape.mul(o, tc)?;
            hs.push(h);
            state = Some((h, c));
        }
        Ok(hs)
    }

    /// Penultimate layer, dropout and output softmax.
    fn head<'p>(
        &'p self,
        tape: &mut Tape<'p, T>,
        pooled: Var,
        rng: Option<&mut dyn RngCore>,
    ) -> Result<(Var, Var, Var), ModelError> {
        let w_o = self.p(tape, HEAD_W_O);
        let b_o = self.p(tape, HEAD_B_O);
        let w_q = self.p(tape, HEAD_W_Q);
        let b_q = self.p(tape, HEAD_B_Q);
        let q = tape.affine(pooled, w_o, Some(b_o))?;
        let q_drop = tape.dropout(q, self.config.dropout, rng)?;
        let logits = tape.affine(q_drop, w_q, Some(b_q))?;
        let probs = tape.softmax(logits)?;
        Ok((q, logits, probs))
    }

    /// Decay weight for every position value of `inst`.
    pub fn decay_weights(&self, inst: &Instance) -> Result<Vec<f64>, ModelError> {
        inst.positions
            .iter()
            .map(|&p| self.config.decay.weight(p as f64))
            .collect()
    }

    /// Records the forward pass on `tape`. Dropout is active iff `rng` is given.
    pub fn build<'p>(
        &'p self,
        tape: &mut Tape<'p, T>,
        inst: &Instance,
        rng: Option<&mut dyn RngCore>,
    ) -> Result<Graph, ModelError> {
        self.check_instance(inst)?;
        let emb = self.p(tape, WORD_EMBEDDING);
        match self.config.kind {
            ModelKind::Pdn => {
                let words = tape.gather(emb, &inst.tokens)?;
                let hs = self.lstm(tape, words)?;
                let h = tape.stack_rows(&hs)?;

                let n = self.config.max_len;
                let pos_ids: Vec<usize> = inst.positions.iter().map(|&p| p.min(n) - 1).collect();
                let pos_table = self.p(tape, POSITION_EMBEDDING);
                let pos = tape.gather(pos_table, &pos_ids)?;
                let (w_p, b_p) = (self.p(tape, PAN_W_P), self.p(tape, PAN_B_P));
                let (w_h, b_h) = (self.p(tape, PAN_W_H), self.p(tape, PAN_B_H));
                let (w_a, b_a) = (self.p(tape, PAN_W_A), self.p(tape, PAN_B_A));
                let v = self.p(tape, PAN_V);
                let pos_proj = tape.affine(pos, w_p, Some(b_p))?;
                let pos_proj = tape.selu(pos_proj);
                let seq_proj = tape.affine(h, w_h, Some(b_h))?;
                let seq_proj = tape.selu(seq_proj);
                let joint = tape.concat_cols(seq_proj, pos_proj)?;
                let scored = tape.affine(joint, w_a, Some(b_a))?;
                let scored = tape.relu(scored);
                let e = tape.matvec(scored, v)?;
                let e = tape.tanh(e);
                let mask = vec![true; inst.len()];
                let alpha = tape.masked_softmax(e, &mask)?;

                let decay = self.decay_weights(inst)?;
                let scales: Vec<T> = decay.iter().map(|&d| T::of(d)).collect();
                let z = if self.faults.break_decay_gradient {
                    tape.row_scale_faulty(h, scales)?
                } else {
                    tape.row_scale(h, scales)?
                };
                let pooled = tape.vecmat(alpha, z)?;
                let (q, logits, probs) = self.head(tape, pooled, rng)?;
                Ok(Graph {
                    probs,
                    logits,
                    pooled,
                    intermediate: q,
                    hidden: Some(h),
                    alpha: Some(alpha),
                    decayed: Some(z),
                    decay,
                })
            }
            ModelKind::Lstm => {
                let words = tape.gather(emb, &inst.tokens)?;
                let hs = self.lstm(tape, words)?;
                let h = tape.stack_rows(&hs)?;
                let last = *hs.last().expect("nonempty");
                let (q, logits, probs) = self.head(tape, last, rng)?;
                Ok(Graph {
                    probs,
                    logits,
                    pooled: last,
                    intermediate: q,
                    hidden: Some(h),
                    alpha: None,
                    decayed: None,
                    decay: Vec::new(),
                })
            }
            ModelKind::Nbow => {
                // canonical order so the sum is bitwise permutation-invariant
                let mut ids = inst.tokens.clone();
                ids.sort_unstable();
                let words = tape.gather(emb, &ids)?;
                let ones = tape.leaf(Tensor::full(&[ids.len()], T::one()));
                let pooled = tape.vecmat(ones, words)?;
                let (q, logits, probs) = self.head(tape, pooled, rng)?;
                Ok(Graph {
                    probs,
                    logits,
                    pooled,
                    intermediate: q,
                    hidden: None,
                    alpha: None,
                    decayed: None,
                    decay: Vec::new(),
                })
            }
        }
    }

    /// Inference-mode forward pass.
    pub fn forward(&self, inst: &Instance) -> Result<ForwardTrace<T>, ModelError> {
        self.forward_with(inst, None)
    }

    pub fn forward_with(
        &self,
        inst: &Instance,
        rng: Option<&mut dyn RngCore>,
    ) -> Result<ForwardTrace<T>, ModelError> {
        let mut tape = Tape::new();
        let g = self.build(&mut tape, inst, rng)?;
        let val = |v: Var| tape.value(v).clone();
        Ok(ForwardTrace {
            hidden: g.hidden.map(val),
            alpha: g.alpha.map(|a| tape.value(a).data().to_vec()),
            decay: g.decay,
            decayed: g.decayed.map(val),
            pooled: val(g.pooled),
            intermediate: val(g.intermediate),
            logits: val(g.logits),
            probs: tape.value(g.probs).data().to_vec(),
        })
    }

    pub fn predict(&self, inst: &Instance) -> Result<usize, ModelError> {
        Ok(self.forward(inst)?.predicted())
    }

    /// Cross-entropy loss and its gradient for one labelled sentence.
    ///
    /// Returns `(loss, predicted class, gradients)`.
    pub fn loss_and_grad(
        &self,
        inst: &Instance,
        label: usize,
        rng: Option<&mut dyn RngCore>,
    ) -> Result<(T, usize, Gradients<T>), ModelError> {
        let mut tape = Tape::new();
        let g = self.build(&mut tape, inst, rng)?;
        let loss = tape.cross_entropy(g.probs, label)?;
        let value = tape.value(loss)[0];
        let predicted = argmax(tape.value(g.probs).data());
        let grads = tape.backward(loss)?;
        Ok((value, predicted, grads))
    }

    /// Loss only, without recording gradients.
    pub fn loss(
        &self,
        inst: &Instance,
        label: usize,
        rng: Option<&mut dyn RngCore>,
    ) -> Result<T, ModelError> {
        let mut tape = Tape::new();
        let g = self.build(&mut tape, inst, rng)?;
        let loss = tape.cross_entropy(g.probs, label)?;
        Ok(tape.value(loss)[0])
    }
}
