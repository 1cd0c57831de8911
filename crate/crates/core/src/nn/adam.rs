//! Adam optimizer with bias correction.

use crate::error::{Error, Result};
use crate::tensor::{Parameter, Tensor};

pub const ADAM_BETA1: f32 = 0.9;
pub const ADAM_BETA2: f32 = 0.999;
pub const ADAM_EPSILON: f32 = 1e-8;

/// Per-parameter optimizer state: first and second moment estimates plus the
/// update count used for bias correction.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub m: Tensor,
    pub v: Tensor,
    pub step_count: u64,
    pub beta1: f32,
    pub beta2: f32,
    pub epsilon: f32,
    pub learning_rate: f32,
}

impl AdamState {
    pub fn new(shape: &[usize], learning_rate: f32) -> Self {
        AdamState {
            m: Tensor::zeros(shape),
            v: Tensor::zeros(shape),
            step_count: 0,
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            epsilon: ADAM_EPSILON,
            learning_rate,
        }
    }
}

/// One Adam update of `param` from its accumulated gradient.
pub fn adam_step(param: &mut Parameter, state: &mut AdamState) -> Result<()> {
    if state.m.shape() != param.value.shape() {
        return Err(Error::dimension(format!(
            "adam state shape {:?} does not match parameter {:?}",
            state.m.shape(),
            param.value.shape()
        )));
    }
    if !param.grad.all_finite() {
        return Err(Error::Divergence(
            "non-finite gradient in adam_step".into(),
        ));
    }
    state.step_count += 1;
    let t = state.step_count as i32;
    let bc1 = 1.0 - (state.beta1 as f64).powi(t);
    let bc2 = 1.0 - (state.beta2 as f64).powi(t);
    let (b1, b2, eps, lr) = (state.beta1, state.beta2, state.epsilon, state.learning_rate);

    let m = state.m.data_mut();
    let v = state.v.data_mut();
    let g = param.grad.data();
    let p = param.value.data_mut();
    for i in 0..p.len() {
        m[i] = b1 * m[i] + (1.0 - b1) * g[i];
        v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
        let m_hat = m[i] as f64 / bc1;
        let v_hat = v[i] as f64 / bc2;
        p[i] -= (lr as f64 * m_hat / (v_hat.sqrt() + eps as f64)) as f32;
    }
    Ok(())
}
