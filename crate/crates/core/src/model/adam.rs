use super::config::{ModelConfig, TrainConfig};
use super::params::{zero_masked, Gradients, ModelParams, Weights};

/// First and second moment estimates, one per trainable value.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Weights,
    pub v: Weights,
}

impl AdamState {
    pub fn new(cfg: &ModelConfig) -> Self {
        AdamState {
            m: Weights::zeros(cfg),
            v: Weights::zeros(cfg),
        }
    }
}

/// Applies one bias-corrected Adam update in place; `t` counts from 1.
pub fn adam_step(
    params: &mut ModelParams,
    cfg: &ModelConfig,
    grads: &Gradients,
    state: &mut AdamState,
    tc: &TrainConfig,
    t: u64,
) {
    assert!(t >= 1, "Adam step index starts at 1");
    let bias1 = 1.0 - tc.beta1.powi(t as i32);
    let bias2 = 1.0 - tc.beta2.powi(t as i32);
    let tensors = params
        .weights
        .tensors_mut()
        .into_iter()
        .zip(grads.tensors())
        .zip(state.m.tensors_mut())
        .zip(state.v.tensors_mut());
    for (((w, g), m), v) in tensors {
        for i in 0..w.len() {
            m[i] = tc.beta1 * m[i] + (1.0 - tc.beta1) * g[i];
            v[i] = tc.beta2 * v[i] + (1.0 - tc.beta2) * g[i] * g[i];
            let m_hat = m[i] / bias1;
            let v_hat = v[i] / bias2;
            w[i] -= tc.learning_rate * m_hat / (v_hat.sqrt() + tc.epsilon);
        }
    }
    let keep = params.keep_map(cfg);
    zero_masked(&mut params.weights, &keep);
}
