use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::cohort::{class_weights, Standardizer};
use crate::exec::Exec;
use crate::metrics::{self, MetricsReport};
use crate::nn::{
    load_container, save_container, AdamState, Architecture, ClassWeights, GradWorkspace, Network, NnError, Params,
};
use crate::nn::weighted_bce;
use crate::seed::{self, tag};

use super::{Dataset, ModelConfig, TrainError};

pub const HISTORY_FILE: &str = "history.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean weighted BCE over the epoch's batches (penalty excluded).
    pub train_loss: f64,
    /// Weighted BCE on the validation split, eval mode.
    pub val_loss: f64,
    /// `None` when the validation split holds a single class.
    pub val_auroc: Option<f64>,
    pub best_val_loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochStats>,
    /// Epoch whose weights were kept.
    pub best_epoch: usize,
    pub stopped_epoch: usize,
    pub stopped_early: bool,
}

impl History {
    pub fn write_csv(&self, path: &Path) -> Result<(), TrainError> {
        let mut w = csv::Writer::from_path(path).map_err(|e| TrainError::Io(format!("{}: {e}", path.display())))?;
        let io = |e: csv::Error| TrainError::Io(format!("{}: {e}", path.display()));
        w.write_record(["epoch", "train_loss", "val_loss", "val_auroc", "best_val_loss"]).map_err(io)?;
        for e in &self.epochs {
            w.write_record([
                e.epoch.to_string(),
                e.train_loss.to_string(),
                e.val_loss.to_string(),
                e.val_auroc.map(|a| a.to_string()).unwrap_or_default(),
                e.best_val_loss.to_string(),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| TrainError::Io(format!("{}: {e}", path.display())))
    }
}

/// Everything needed to rebuild and apply a trained model, stored as the
/// container's config block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub config: ModelConfig,
    pub arch: Architecture,
    pub class_weights: ClassWeights,
    pub standardizer: Standardizer,
    pub feature_names: Vec<String>,
    pub best_epoch: usize,
    pub stopped_epoch: usize,
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub config: ModelConfig,
    pub network: Network,
    pub params: Params,
    pub class_weights: ClassWeights,
    pub standardizer: Standardizer,
    pub feature_names: Vec<String>,
    pub history: History,
}

fn divergence(epoch: usize, what: impl Into<String>) -> TrainError {
    TrainError::Divergence { epoch, what: what.into() }
}

/// Mean weighted BCE of eval-mode predictions.
fn mean_loss(probs: &[f64], labels: &[bool], w: ClassWeights) -> f64 {
    probs.iter().zip(labels).map(|(&p, &y)| weighted_bce(p, y as u8 as f64, w)).sum::<f64>() / probs.len().max(1) as f64
}

pub fn train(data: &Dataset, train_idx: &[usize], val_idx: &[usize], config: &ModelConfig, exec: Exec) -> Result<TrainedModel, TrainError> {
    train_with(data, train_idx, val_idx, config, exec, &mut |_| {})
}

/// Mini-batch Adam with per-epoch validation and early stopping on the
/// validation loss; the best epoch's weights are restored at the end.
pub fn train_with(
    data: &Dataset,
    train_idx: &[usize],
    val_idx: &[usize],
    config: &ModelConfig,
    exec: Exec,
    on_epoch: &mut dyn FnMut(&EpochStats),
) -> Result<TrainedModel, TrainError> {
    config.validate()?;
    if train_idx.is_empty() || val_idx.is_empty() {
        return Err(TrainError::Data("training and validation splits must be non-empty".into()));
    }
    if config.mode.uses_drugs() {
        if data.drugs.is_none() {
            return Err(TrainError::Data("model uses drugs but the dataset has no drug features".into()));
        }
        if data.k() != config.k {
            return Err(TrainError::Config(format!("k = {} but the drug representation is {} wide", config.k, data.k())));
        }
        if data.n_drugs != config.n_drugs {
            return Err(TrainError::Config(format!("n_drugs = {} but the dataset pads to {}", config.n_drugs, data.n_drugs)));
        }
    }
    let task = config.task;
    let weights = class_weights(&data.labels_of(train_idx, task), config.weight_mode())?;
    let arch = config.architecture(data.features());
    let (network, mut params) = Network::build(&arch, seed::derive(config.seed, tag::INIT))?;
    let mut adam = AdamState::new(&params, config.adam());
    let mut ws = GradWorkspace::new(&params, config.batch);

    let val_samples = data.samples(val_idx, task);
    let val_labels = data.labels_of(val_idx, task);
    let mut order = train_idx.to_vec();
    let mut history = History::default();
    let mut best = (f64::INFINITY, params.clone());
    let mut waited = 0usize;

    for epoch in 1..=config.epochs {
        order.copy_from_slice(train_idx);
        order.shuffle(&mut seed::rng(seed::derive_path(config.seed, &[tag::SHUFFLE, epoch as u64])));
        let mut loss_sum = 0.0;
        for batch_idx in order.chunks(config.batch) {
            let step = adam.t;
            let batch = data.samples(batch_idx, task);
            let drop_seeds: Vec<u64> =
                (0..batch.len()).map(|j| seed::derive_path(config.seed, &[tag::DROPOUT, step, j as u64])).collect();
            let (loss, _, _) = network
                .loss_and_grad_into(&params, &batch, weights, Some(&drop_seeds), exec, &mut ws)
                .map_err(|e| match e {
                    NnError::NonFiniteGradient(t) => divergence(epoch, format!("gradient of {t}")),
                    other => TrainError::Nn(other),
                })?;
            if !loss.is_finite() {
                return Err(divergence(epoch, "training loss"));
            }
            loss_sum += loss * batch.len() as f64;
            adam.step(&mut params, ws.grads())?;
        }
        if let Some(t) = params.first_non_finite() {
            return Err(divergence(epoch, format!("parameter {t}")));
        }
        let probs = network.predict_batch(&params, &val_samples, exec)?;
        let val_loss = mean_loss(&probs, &val_labels, weights);
        if !val_loss.is_finite() {
            return Err(divergence(epoch, "validation loss"));
        }
        let val_auroc = metrics::auroc(&probs, &val_labels).ok();
        if val_loss < best.0 {
            best = (val_loss, params.clone());
            history.best_epoch = epoch;
            waited = 0;
        } else {
            waited += 1;
        }
        let stats = EpochStats { epoch, train_loss: loss_sum / train_idx.len() as f64, val_loss, val_auroc, best_val_loss: best.0 };
        on_epoch(&stats);
        history.epochs.push(stats);
        history.stopped_epoch = epoch;
        if waited > config.patience {
            history.stopped_early = true;
            break;
        }
    }

    Ok(TrainedModel {
        config: config.clone(),
        network,
        params: best.1,
        class_weights: weights,
        standardizer: data.standardizer.clone(),
        feature_names: data.feature_names.clone(),
        history,
    })
}

impl TrainedModel {
    /// Eval-mode probabilities for the given dataset rows.
    pub fn predict(&self, data: &Dataset, idx: &[usize], exec: Exec) -> Result<Vec<f64>, TrainError> {
        Ok(self.network.predict_batch(&self.params, &data.samples(idx, self.config.task), exec)?)
    }

    pub fn evaluate(&self, data: &Dataset, idx: &[usize], exec: Exec) -> Result<MetricsReport, TrainError> {
        let probs = self.predict(data, idx, exec)?;
        Ok(metrics::evaluate(&probs, &data.labels_of(idx, self.config.task), metrics::DEFAULT_THRESHOLD)?)
    }

    pub fn artifact(&self) -> ModelArtifact {
        ModelArtifact {
            config: self.config.clone(),
            arch: self.network.arch.clone(),
            class_weights: self.class_weights,
            standardizer: self.standardizer.clone(),
            feature_names: self.feature_names.clone(),
            best_epoch: self.history.best_epoch,
            stopped_epoch: self.history.stopped_epoch,
        }
    }

    /// Weight container plus `history.csv`.
    pub fn save(&self, dir: &Path) -> Result<(), TrainError> {
        save_container(dir, &self.artifact(), &self.params)?;
        self.history.write_csv(&dir.join(HISTORY_FILE))
    }

    /// Rebuilds a model from its container; the history is not restored.
    pub fn load(dir: &Path) -> Result<TrainedModel, TrainError> {
        let (a, params): (ModelArtifact, Params) = load_container(dir)?;
        let (network, fresh) = Network::build(&a.arch, 0)?;
        if fresh.names() != params.names() || !fresh.same_layout(&params) {
            return Err(TrainError::Data("container tensors do not match the stored architecture".into()));
        }
        Ok(TrainedModel {
            config: a.config,
            network,
            params,
            class_weights: a.class_weights,
            standardizer: a.standardizer,
            feature_names: a.feature_names,
            history: History { best_epoch: a.best_epoch, stopped_epoch: a.stopped_epoch, ..History::default() },
        })
    }
}
