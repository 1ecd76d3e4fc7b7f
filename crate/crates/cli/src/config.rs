//! `train` run configuration (TOML or JSON by file extension).

use std::path::{Path, PathBuf};

use rxfuse::exec::Exec;
use rxfuse::train::ModelConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataPaths {
    pub timeseries: PathBuf,
    pub labels: PathBuf,
    pub resolved: PathBuf,
    /// Existing split file; generated from `split_seed` when absent.
    #[serde(default)]
    pub split: Option<PathBuf>,
    #[serde(default)]
    pub split_seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "one")]
    pub repetitions: usize,
    #[serde(default)]
    pub exec: Exec,
    pub data: DataPaths,
    #[serde(default)]
    pub model: ModelConfig,
}

fn one() -> usize {
    1
}

impl TrainConfig {
    /// Parses the file and resolves data paths relative to its directory.
    pub fn load(path: &Path) -> Result<TrainConfig, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let mut cfg: TrainConfig = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
        };
        let base = path.parent().unwrap_or(Path::new("."));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        rebase(&mut cfg.data.timeseries);
        rebase(&mut cfg.data.labels);
        rebase(&mut cfg.data.resolved);
        if let Some(p) = cfg.data.split.as_mut() {
            rebase(p);
        }
        if let rxfuse::embedding::ProviderKind::Table { path } = &mut cfg.model.provider {
            rebase(path);
        }
        if cfg.repetitions == 0 {
            return Err(CliError::Usage("repetitions must be at least 1".into()));
        }
        cfg.model.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_with_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.toml");
        std::fs::write(
            &p,
            r#"
repetitions = 3
[data]
timeseries = "ts.csv"
labels = "labels.csv"
resolved = "resolved.csv"
[model]
task = "mort_icu"
mode = "baseline"
epochs = 5
"#,
        )
        .unwrap();
        let c = TrainConfig::load(&p).unwrap();
        assert_eq!(c.repetitions, 3);
        assert_eq!(c.model.hidden, 128);
        assert_eq!(c.model.batch, 32);
        assert_eq!(c.data.labels, dir.path().join("labels.csv"));
    }

    #[test]
    fn unknown_key_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.toml");
        std::fs::write(&p, "[data]\ntimeseries='a'\nlabels='b'\nresolved='c'\n[model]\nlearning_rate = 0.1\n").unwrap();
        assert!(matches!(TrainConfig::load(&p), Err(CliError::Usage(_))));
    }
}
