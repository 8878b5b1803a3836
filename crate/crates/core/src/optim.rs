//! Adam with bias correction.

use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// L2 penalty, added to the gradient as `weight_decay * param`.
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 5e-4,
        }
    }
}

/// First and second moment estimates, one pair per parameter matrix.
#[derive(Debug, Clone, Default)]
pub struct AdamState {
    pub step: u64,
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
}

impl AdamState {
    pub fn new() -> Self {
        Self::default()
    }
}

pub fn adam_step(
    params: &mut [&mut Array2<f64>],
    grads: &[&Array2<f64>],
    state: &mut AdamState,
    cfg: &AdamConfig,
) {
    assert_eq!(params.len(), grads.len(), "one gradient per parameter");
    if state.m.is_empty() {
        state.m = params.iter().map(|p| Array2::zeros(p.raw_dim())).collect();
        state.v = state.m.clone();
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);

    for (i, (param, grad)) in params.iter_mut().zip(grads).enumerate() {
        assert_eq!(param.dim(), grad.dim(), "parameter {i}: gradient shape");
        Zip::from(&mut **param)
            .and(*grad)
            .and(&mut state.m[i])
            .and(&mut state.v[i])
            .for_each(|p, &g, m, v| {
                let g = g + cfg.weight_decay * *p;
                *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
                *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *p -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
            });
    }
}
