//! Baseline and multimodal models per task: configuration, data
//! preparation, the training loop with early stopping, persistence and
//! repeated runs.

mod config;
mod dataset;
mod trainer;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::ModelConfig;
pub use dataset::Dataset;
pub use trainer::{train, train_with, EpochStats, History, ModelArtifact, TrainedModel, HISTORY_FILE};

use crate::cohort::CohortError;
use crate::exec::Exec;
use crate::metrics::{MeanStd, MetricError, MetricsReport};
use crate::nn::{ContainerError, NnError};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("training diverged in epoch {epoch}: non-finite {what}")]
    Divergence { epoch: usize, what: String },
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Container(#[from] ContainerError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("{0}")]
    Io(String),
}

impl From<CohortError> for TrainError {
    fn from(e: CohortError) -> Self {
        TrainError::Data(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub seed: u64,
    pub test: MetricsReport,
    pub best_epoch: usize,
    pub stopped_epoch: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub auroc: MeanStd,
    pub auprc: MeanStd,
    pub f1: MeanStd,
}

impl Summary {
    pub fn of(runs: &[RunResult]) -> Summary {
        let col = |f: fn(&MetricsReport) -> f64| MeanStd::of(&runs.iter().map(|r| f(&r.test)).collect::<Vec<_>>());
        Summary { auroc: col(|m| m.auroc), auprc: col(|m| m.auprc), f1: col(|m| m.f1) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Repetitions {
    pub runs: Vec<RunResult>,
    pub summary: Summary,
}

/// `n` trainings with seeds `config.seed .. config.seed + n`, each scored
/// on `test`.
pub fn run_repetitions(
    config: &ModelConfig,
    data: &Dataset,
    (train_idx, val_idx, test_idx): (&[usize], &[usize], &[usize]),
    n: usize,
    exec: Exec,
    on_run: &mut dyn FnMut(&RunResult, &TrainedModel),
) -> Result<Repetitions, TrainError> {
    if n == 0 {
        return Err(TrainError::Config("repetitions must be at least 1".into()));
    }
    let mut runs = Vec::with_capacity(n);
    for r in 0..n as u64 {
        let cfg = ModelConfig { seed: config.seed + r, ..config.clone() };
        let model = train(data, train_idx, val_idx, &cfg, exec)?;
        let run = RunResult {
            seed: cfg.seed,
            test: model.evaluate(data, test_idx, exec)?,
            best_epoch: model.history.best_epoch,
            stopped_epoch: model.history.stopped_epoch,
        };
        on_run(&run, &model);
        runs.push(run);
    }
    let summary = Summary::of(&runs);
    Ok(Repetitions { runs, summary })
}
