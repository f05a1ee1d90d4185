use serde::{Deserialize, Serialize};

use super::{NumericError, ParamId, ParamStore, Scalar, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Moment estimates for every tensor of a [`ParamStore`].
#[derive(Clone, Debug)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    m: Vec<Tensor<T>>,
    v: Vec<Tensor<T>>,
    t: u64,
    frozen: Vec<bool>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &ParamStore<T>, config: AdamConfig) -> Self {
        Self {
            config,
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
            frozen: vec![false; params.len()],
        }
    }

    /// Excludes a parameter from updates.
    pub fn freeze(&mut self, id: ParamId) {
        self.frozen[id.0] = true;
    }

    pub fn is_frozen(&self, id: ParamId) -> bool {
        self.frozen[id.0]
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    pub fn first_moment(&self, id: ParamId) -> &Tensor<T> {
        &self.m[id.0]
    }

    pub fn second_moment(&self, id: ParamId) -> &Tensor<T> {
        &self.v[id.0]
    }
}

/// One bias-corrected Adam update of every unfrozen parameter.
pub fn adam_step<T: Scalar>(
    params: &mut ParamStore<T>,
    grads: &[Tensor<T>],
    state: &mut AdamState<T>,
) -> Result<(), NumericError> {
    if grads.len() != params.len() || state.m.len() != params.len() {
        return Err(NumericError::ShapeMismatch {
            op: "adam_step",
            left: vec![params.len()],
            right: vec![grads.len()],
        });
    }
    for id in params.ids() {
        let (p, g) = (params.get(id), &grads[id.0]);
        if p.dims() != g.dims() || p.dims() != state.m[id.0].dims() {
            return Err(NumericError::ShapeMismatch {
                op: "adam_step",
                left: p.dims().to_vec(),
                right: g.dims().to_vec(),
            });
        }
    }

    state.t += 1;
    let c = state.config;
    let t = state.t as i32;
    let bc1 = T::of(1.0 - c.beta1.powi(t));
    let bc2 = T::of(1.0 - c.beta2.powi(t));
    let (b1, b2) = (T::of(c.beta1), T::of(c.beta2));
    let (one_b1, one_b2) = (T::of(1.0 - c.beta1), T::of(1.0 - c.beta2));
    let (lr, eps) = (T::of(c.lr), T::of(c.eps));

    for id in params.ids() {
        if state.frozen[id.0] {
            continue;
        }
        let g = grads[id.0].data();
        let m = state.m[id.0].data_mut();
        let v = state.v[id.0].data_mut();
        let p = params.get_mut(id).data_mut();
        for i in 0..p.len() {
            m[i] = b1 * m[i] + one_b1 * g[i];
            v[i] = b2 * v[i] + one_b2 * g[i] * g[i];
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            p[i] = p[i] - lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}
