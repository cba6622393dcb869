//! Adam with bias correction, used here for gradient *ascent*: parameters move
//! along `+m̂ / (√v̂ + ε)`.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(num_params: usize) -> Self {
        Self {
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
            step: 0,
        }
    }
}

/// One ascent step. `params` and `grads` must yield exactly as many items as
/// the state was created for.
pub fn adam_step<'a, 'b>(
    params: impl Iterator<Item = &'a mut f64>,
    grads: impl Iterator<Item = &'b f64>,
    state: &mut AdamState,
    config: &AdamConfig,
) {
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - config.beta1.powi(t);
    let bc2 = 1.0 - config.beta2.powi(t);
    let mut n = 0;
    for (((p, g), m), v) in params.zip(grads).zip(state.m.iter_mut()).zip(state.v.iter_mut()) {
        *m = config.beta1 * *m + (1.0 - config.beta1) * g;
        *v = config.beta2 * *v + (1.0 - config.beta2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *p += config.learning_rate * m_hat / (v_hat.sqrt() + config.epsilon);
        n += 1;
    }
    debug_assert_eq!(n, state.m.len(), "adam state does not match parameter count");
}

/// Global L2 norm across several gradient buffers.
pub fn global_norm<'a>(grads: impl Iterator<Item = &'a f64>) -> f64 {
    grads.map(|g| g * g).sum::<f64>().sqrt()
}
