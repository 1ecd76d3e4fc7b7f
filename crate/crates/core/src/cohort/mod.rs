//! Patient cohorts: 24-hour time series, resolved drug lists and binary
//! outcome labels, plus standardization, drug matrices, stratified splits,
//! class weights and a synthetic generator.

mod drugs;
mod io;
mod split;
mod standardize;
pub mod synth;
mod weights;

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use drugs::{build_drug_matrix, DrugFeatures, DrugMatrix};
pub use io::{
    ingest_timeseries, read_labels, read_prescriptions, read_resolved, write_labels, write_prescriptions,
    write_resolved, write_timeseries, Prescription, ResolvedRow,
};
pub use split::{stratified_split, stratified_split_keys, CohortSplit, SplitRatios};
pub use standardize::Standardizer;
pub use synth::{corpus_smiles, standin_embedding_table, synth_generate, SynthCohort, SynthConfig};
pub use weights::{class_weights, WeightMode};

/// Rows per patient: the first 24 hours.
pub const HOURS: usize = 24;

#[derive(Debug, Error)]
pub enum CohortError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: bad header: {reason}")]
    Header { path: PathBuf, reason: String },
    #[error("patient {id}: missing hour {hour}")]
    MissingHour { id: String, hour: usize },
    #[error("patient {id}: duplicate hour {hour}")]
    DuplicateHour { id: String, hour: usize },
    #[error("line {line}: expected {expected} fields, found {found}")]
    RaggedRow { line: u64, expected: usize, found: usize },
    #[error("line {line}: bad value in column {column}: {value:?}")]
    BadValue { line: u64, column: String, value: String },
    #[error("patient {0} has time series but no labels")]
    MissingLabels(String),
    #[error("labels contain a single class")]
    SingleClass,
    #[error("drug row {order} of patient {id}: {source}")]
    Embed { id: String, order: usize, source: crate::embedding::EmbedError },
    #[error("invalid drug matrix bytes: {0}")]
    DrugMatrixBytes(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    MortHosp,
    MortIcu,
    #[serde(rename = "los_3")]
    Los3,
    #[serde(rename = "los_7")]
    Los7,
}

impl Task {
    pub const ALL: [Task; 4] = [Task::MortHosp, Task::MortIcu, Task::Los3, Task::Los7];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Task::MortHosp => "mort_hosp",
            Task::MortIcu => "mort_icu",
            Task::Los3 => "los_3",
            Task::Los7 => "los_7",
        }
    }

    pub fn parse(s: &str) -> Option<Task> {
        Task::ALL.into_iter().find(|t| t.name() == s)
    }

    /// Loss weighting used for this task in training: 1:5 for in-ICU
    /// mortality, balanced otherwise.
    pub fn default_weight_mode(self) -> WeightMode {
        match self {
            Task::MortIcu => WeightMode::Ratio { neg: 1.0, pos: 5.0 },
            _ => WeightMode::Balanced,
        }
    }
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Binary outcomes in [`Task::ALL`] order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Labels(pub [bool; 4]);

impl Labels {
    pub fn get(&self, task: Task) -> bool {
        self.0[task.index()]
    }

    /// 4-bit composite used as the stratification key.
    pub fn composite(&self) -> u8 {
        self.0.iter().enumerate().fold(0, |acc, (i, &b)| acc | ((b as u8) << i))
    }
}

/// One patient's first 24 hours, row-major (hour × feature).
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub features: usize,
    pub values: Vec<f64>,
}

impl TimeSeries {
    pub fn hour(&self, h: usize) -> &[f64] {
        &self.values[h * self.features..(h + 1) * self.features]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatientRecord {
    pub id: String,
    pub series: TimeSeries,
    /// Resolved drugs in prescription order.
    pub drugs: Vec<ResolvedDrugRef>,
    pub labels: Labels,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedDrugRef {
    pub smiles: String,
    pub cid: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CohortStats {
    pub with_timeseries: usize,
    /// Patients dropped because none of their prescriptions resolved.
    pub excluded_no_drugs: usize,
    pub final_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    pub feature_names: Vec<String>,
    pub records: Vec<PatientRecord>,
    pub excluded: Vec<String>,
}

impl Cohort {
    /// Joins time series, labels and resolved drugs. Patients whose drug
    /// list is empty are excluded and listed in `excluded`; patients with
    /// some unresolved prescriptions keep the resolved subset.
    pub fn assemble(
        feature_names: Vec<String>,
        series: BTreeMap<String, TimeSeries>,
        labels: &BTreeMap<String, Labels>,
        resolved: &[ResolvedRow],
    ) -> Result<Cohort, CohortError> {
        let mut by_patient: BTreeMap<&str, Vec<&ResolvedRow>> = BTreeMap::new();
        for r in resolved {
            by_patient.entry(r.patient_id.as_str()).or_default().push(r);
        }
        let mut records = Vec::new();
        let mut excluded = Vec::new();
        for (id, ts) in series {
            let lab = *labels.get(&id).ok_or_else(|| CohortError::MissingLabels(id.clone()))?;
            let mut rows = by_patient.remove(id.as_str()).unwrap_or_default();
            rows.sort_by_key(|r| r.order_index);
            if rows.is_empty() {
                excluded.push(id);
                continue;
            }
            let drugs = rows.iter().map(|r| ResolvedDrugRef { smiles: r.smiles.clone(), cid: r.cid }).collect();
            records.push(PatientRecord { id, series: ts, drugs, labels: lab });
        }
        Ok(Cohort { feature_names, records, excluded })
    }

    pub fn features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn stats(&self) -> CohortStats {
        CohortStats {
            with_timeseries: self.records.len() + self.excluded.len(),
            excluded_no_drugs: self.excluded.len(),
            final_size: self.records.len(),
        }
    }

    pub fn index_of(&self) -> BTreeMap<&str, usize> {
        self.records.iter().enumerate().map(|(i, r)| (r.id.as_str(), i)).collect()
    }

    /// Positive rate of `task` over the given record indices.
    pub fn positive_rate(&self, idx: &[usize], task: Task) -> f64 {
        if idx.is_empty() {
            return 0.0;
        }
        idx.iter().filter(|&&i| self.records[i].labels.get(task)).count() as f64 / idx.len() as f64
    }
}
