use serde::{Deserialize, Serialize};

use crate::cohort::{Task, WeightMode, HOURS};
use crate::embedding::ProviderKind;
use crate::nn::{AdamConfig, Architecture, L2Scope, Mode};

use super::TrainError;

/// One model for one task. Field names double as the run-config keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub task: Task,
    pub mode: Mode,
    pub hidden: usize,
    pub conv_filters: Vec<usize>,
    pub kernel: usize,
    pub fc: Vec<usize>,
    pub dropout: f64,
    pub l2: f64,
    pub l2_scope: L2Scope,
    pub lr: f64,
    pub decay: f64,
    pub batch: usize,
    pub epochs: usize,
    /// Epochs without validation-loss improvement tolerated before stopping.
    pub patience: usize,
    pub n_drugs: usize,
    pub k: usize,
    pub seed: u64,
    pub provider: ProviderKind,
    /// Overrides the task's default class weighting.
    pub weight_mode: Option<WeightMode>,
    pub standardize: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            task: Task::MortHosp,
            mode: Mode::Multimodal,
            hidden: 128,
            conv_filters: vec![32, 64, 128],
            kernel: 3,
            fc: vec![1024, 512, 256],
            dropout: 0.3,
            l2: 0.05,
            l2_scope: L2Scope::AllDense,
            lr: 1e-3,
            decay: 1e-2,
            batch: 32,
            epochs: 100,
            patience: 10,
            n_drugs: 64,
            k: 1024,
            seed: 0,
            provider: ProviderKind::default(),
            weight_mode: None,
            standardize: true,
        }
    }
}

impl ModelConfig {
    pub fn weight_mode(&self) -> WeightMode {
        self.weight_mode.unwrap_or_else(|| self.task.default_weight_mode())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig { lr: self.lr, decay: self.decay, ..AdamConfig::default() }
    }

    pub fn architecture(&self, features: usize) -> Architecture {
        Architecture {
            mode: self.mode,
            features,
            steps: HOURS,
            hidden: self.hidden,
            conv_filters: self.conv_filters.clone(),
            kernel: self.kernel,
            fc: self.fc.clone(),
            dropout: self.dropout,
            l2: self.l2,
            l2_scope: self.l2_scope,
            n_drugs: self.n_drugs,
            k: self.k,
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::Config(m));
        if self.hidden == 0 || self.batch == 0 || self.epochs == 0 {
            return bad("hidden, batch and epochs must be positive".into());
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        if !(self.decay >= 0.0 && self.decay.is_finite()) {
            return bad(format!("decay must be non-negative, got {}", self.decay));
        }
        self.architecture(1).validate().map_err(|e| TrainError::Config(e.to_string()))
    }
}
