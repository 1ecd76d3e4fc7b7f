//! Results table: one row per (task, model) with AUROC, AUPRC and F1 as
//! mean ± sample std over repetitions.

use std::fmt::Write as _;
use std::path::Path;

use rxfuse::cohort::Task;
use rxfuse::embedding::ProviderKind;
use rxfuse::metrics::MeanStd;
use rxfuse::nn::Mode;
use rxfuse::train::{ModelConfig, Summary};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub task: Task,
    pub mode: Mode,
    pub model: String,
    pub repetitions: usize,
    pub summary: Summary,
}

pub fn model_label(cfg: &ModelConfig) -> String {
    let provider = match cfg.provider {
        ProviderKind::Ecfp { .. } => "ecfp",
        ProviderKind::Table { .. } => "table",
    };
    match cfg.mode {
        Mode::Baseline => "baseline".into(),
        Mode::Multimodal => format!("multimodal-{provider}"),
        Mode::DrugsOnly => format!("drugs_only-{provider}"),
    }
}

fn model_rank(label: &str) -> (usize, &str) {
    let r = ["baseline", "multimodal-ecfp", "multimodal-table"].iter().position(|l| *l == label).unwrap_or(3);
    (r, label)
}

pub fn load_summaries(dirs: &[impl AsRef<Path>]) -> Result<Vec<RunSummary>, CliError> {
    let mut out = Vec::new();
    for d in dirs {
        let p = d.as_ref().join(SUMMARY_FILE);
        let text = std::fs::read_to_string(&p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
        out.push(serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?);
    }
    out.sort_by(|a: &RunSummary, b| (a.task, model_rank(&a.model)).cmp(&(b.task, model_rank(&b.model))));
    Ok(out)
}

fn cell(m: &MeanStd) -> String {
    let flag = if m.std_defined { "" } else { "*" };
    format!("{:.4} ± {:.4}{flag}", m.mean, m.std)
}

pub fn render_text(rows: &[RunSummary]) -> String {
    let mut s = String::new();
    writeln!(s, "{:<10} {:<18} {:>3}  {:<18} {:<18} {:<18}", "task", "model", "n", "AUROC", "AUPRC", "F1").unwrap();
    for r in rows {
        let m = &r.summary;
        writeln!(
            s,
            "{:<10} {:<18} {:>3}  {:<18} {:<18} {:<18}",
            r.task.name(),
            r.model,
            r.repetitions,
            cell(&m.auroc),
            cell(&m.auprc),
            cell(&m.f1)
        )
        .unwrap();
    }
    if rows.iter().any(|r| !r.summary.auroc.std_defined) {
        s.push_str("* single run: std undefined, shown as 0\n");
    }
    s
}

pub fn write_csv(rows: &[RunSummary], path: &Path) -> Result<(), CliError> {
    let io = |e: csv::Error| CliError::Io(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record([
        "task", "model", "n", "auroc_mean", "auroc_std", "auprc_mean", "auprc_std", "f1_mean", "f1_std", "std_defined",
    ])
    .map_err(io)?;
    for r in rows {
        let m = &r.summary;
        w.write_record([
            r.task.name().to_string(),
            r.model.clone(),
            r.repetitions.to_string(),
            m.auroc.mean.to_string(),
            m.auroc.std.to_string(),
            m.auprc.mean.to_string(),
            m.auprc.std.to_string(),
            m.f1.mean.to_string(),
            m.f1.std.to_string(),
            m.auroc.std_defined.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}
