use super::{TrainConfig, TrainingError};
use crate::encoder::{lit, EncoderConfig, EncoderParams, Scalar};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone)]
pub struct AdamWState<T> {
    pub m: EncoderParams<T>,
    pub v: EncoderParams<T>,
    pub step: u64,
}

impl<T: Scalar> AdamWState<T> {
    pub fn new(config: &EncoderConfig) -> Self {
        AdamWState { m: EncoderParams::zeros(config), v: EncoderParams::zeros(config), step: 0 }
    }
}

/// One AdamW update with bias correction. Weight decay is decoupled and
/// skips biases, layer-norm parameters and special-token embedding rows.
pub fn optimizer_step<T: Scalar>(
    params: &mut EncoderParams<T>,
    grads: &EncoderParams<T>,
    state: &mut AdamWState<T>,
    config: &TrainConfig,
) -> Result<(), TrainingError> {
    if grads.config != params.config || state.m.config != params.config || state.v.config != params.config {
        return Err(TrainingError::ShapeMismatch);
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2): (T, T) = (lit(ADAM_BETA1), lit(ADAM_BETA2));
    let one = T::one();
    let c1 = one - b1.powi(t);
    let c2 = one - b2.powi(t);
    let lr: T = lit(config.learning_rate);
    let decay: T = lit(config.learning_rate * config.weight_decay);
    let eps: T = lit(ADAM_EPS);

    let g_all = grads.tensors();
    let mut m_all = state.m.tensors_mut();
    let mut v_all = state.v.tensors_mut();
    for (((p, g), m), v) in params.tensors_mut().into_iter().zip(&g_all).zip(m_all.iter_mut()).zip(v_all.iter_mut()) {
        if p.data.len() != g.data.len() {
            return Err(TrainingError::ShapeMismatch);
        }
        let row_len = p.shape.last().copied().unwrap_or(1);
        for (idx, x) in p.data.iter_mut().enumerate() {
            let gi = g.data[idx];
            let mi = b1 * m.data[idx] + (one - b1) * gi;
            let vi = b2 * v.data[idx] + (one - b2) * gi * gi;
            m.data[idx] = mi;
            v.data[idx] = vi;
            if p.kind.decays(idx, row_len) {
                *x -= decay * *x;
            }
            *x -= lr * (mi / c1) / ((vi / c2).sqrt() + eps);
        }
    }
    Ok(())
}
