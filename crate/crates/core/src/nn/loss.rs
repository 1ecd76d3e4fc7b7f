use serde::{Deserialize, Serialize};

use super::ops::sigmoid;

pub const PROB_EPS: f64 = 1e-7;

/// Per-class loss weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    pub w_pos: f64,
    pub w_neg: f64,
}

impl ClassWeights {
    pub const UNIT: ClassWeights = ClassWeights { w_pos: 1.0, w_neg: 1.0 };
}

impl Default for ClassWeights {
    fn default() -> Self {
        Self::UNIT
    }
}

/// −[w_pos·y·ln p + w_neg·(1−y)·ln(1−p)] with p clamped to [ε, 1−ε].
pub fn weighted_bce(p: f64, y: f64, w: ClassWeights) -> f64 {
    let p = p.clamp(PROB_EPS, 1.0 - PROB_EPS);
    -(w.w_pos * y * p.ln() + w.w_neg * (1.0 - y) * (1.0 - p).ln())
}

/// Mean weighted BCE over a batch.
pub fn weighted_bce_mean(p: &[f64], y: &[f64], w: ClassWeights) -> f64 {
    if p.is_empty() {
        return 0.0;
    }
    p.iter().zip(y).map(|(&p, &y)| weighted_bce(p, y, w)).sum::<f64>() / p.len() as f64
}

/// Loss and ∂loss/∂logit for a sigmoid output. Inside the clamp region the
/// gradient is zero.
pub fn bce_from_logit(logit: f64, y: f64, w: ClassWeights) -> (f64, f64, f64) {
    let p = sigmoid(logit);
    let loss = weighted_bce(p, y, w);
    let grad = if p < PROB_EPS || p > 1.0 - PROB_EPS {
        0.0
    } else {
        w.w_pos * y * (p - 1.0) + w.w_neg * (1.0 - y) * p
    };
    (p, loss, grad)
}
