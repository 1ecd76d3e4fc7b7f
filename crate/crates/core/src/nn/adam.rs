use serde::{Deserialize, Serialize};

use super::tensor::Params;
use super::NnError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Per-step learning-rate decay: lr_t = lr / (1 + decay·t).
    pub decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8, decay: 1e-2 }
    }
}

/// Bias-corrected Adam with inverse-time learning-rate decay.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    pub m: Params,
    pub v: Params,
    /// Completed steps.
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &Params, config: AdamConfig) -> Self {
        AdamState { config, m: params.zeros_like(), v: params.zeros_like(), t: 0 }
    }

    /// Learning rate applied at step index `t` (0 for the first step).
    pub fn lr_at(&self, t: u64) -> f64 {
        self.config.lr / (1.0 + self.config.decay * t as f64)
    }

    pub fn step(&mut self, params: &mut Params, grads: &Params) -> Result<(), NnError> {
        if !params.same_layout(grads) || !params.same_layout(&self.m) {
            return Err(NnError::ShapeMismatch("adam: parameter/gradient layout differs".into()));
        }
        let c = self.config;
        let lr = self.lr_at(self.t);
        self.t += 1;
        let bc1 = 1.0 - c.beta1.powi(self.t as i32);
        let bc2 = 1.0 - c.beta2.powi(self.t as i32);
        for (((p, g), m), v) in params
            .tensors_mut()
            .iter_mut()
            .zip(grads.tensors())
            .zip(self.m.tensors_mut())
            .zip(self.v.tensors_mut())
        {
            for (((p, &g), m), v) in p.data_mut().iter_mut().zip(g.data()).zip(m.data_mut()).zip(v.data_mut()) {
                *m = c.beta1 * *m + (1.0 - c.beta1) * g;
                *v = c.beta2 * *v + (1.0 - c.beta2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *p -= lr * m_hat / (v_hat.sqrt() + c.eps);
            }
        }
        Ok(())
    }
}
