//! Ranking and threshold metrics for binary outcomes.
//!
//! AUROC is computed from average ranks (Mann-Whitney U), so tied scores
//! contribute one half. AUPRC is average precision: scores are visited in
//! descending order, ties form a single group, and precision is taken at
//! group boundaries weighted by the recall gained in that group.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("labels contain a single class")]
    SingleClass,
    #[error("no positive labels")]
    NoPositives,
    #[error("scores and labels differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("non-finite score at index {0}")]
    NonFinite(usize),
}

fn check(scores: &[f64], labels: &[bool]) -> Result<(usize, usize), MetricError> {
    if scores.len() != labels.len() {
        return Err(MetricError::LengthMismatch(scores.len(), labels.len()));
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(MetricError::NonFinite(i));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    Ok((pos, labels.len() - pos))
}

/// Indices sorted by score, descending; stable on ties.
fn order_desc(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    idx
}

pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<f64, MetricError> {
    let (pos, neg) = check(scores, labels)?;
    if pos == 0 || neg == 0 {
        return Err(MetricError::SingleClass);
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Sum of 1-based average ranks of positives, accumulated in doubled units
    // to stay exact in integers.
    let mut rank_sum2: u128 = 0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1, average doubled = i + j + 2
        let positives = idx[i..=j].iter().filter(|&&k| labels[k]).count() as u128;
        rank_sum2 += positives * (i + j + 2) as u128;
        i = j + 1;
    }
    let (p, n) = (pos as u128, neg as u128);
    let u2 = rank_sum2 - p * (p + 1);
    Ok(u2 as f64 / (2 * p * n) as f64)
}

pub fn auprc(scores: &[f64], labels: &[bool]) -> Result<f64, MetricError> {
    let (pos, _) = check(scores, labels)?;
    if pos == 0 {
        return Err(MetricError::NoPositives);
    }
    let idx = order_desc(scores);
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut ap = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut group_tp = 0;
        let mut j = i;
        while j < idx.len() && scores[idx[j]] == scores[idx[i]] {
            if labels[idx[j]] {
                group_tp += 1;
            } else {
                fp += 1;
            }
            j += 1;
        }
        tp += group_tp;
        if group_tp > 0 {
            let precision = tp as f64 / (tp + fp) as f64;
            ap += precision * group_tp as f64 / pos as f64;
        }
        i = j;
    }
    Ok(ap)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub threshold: f64,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Predictions are `score >= threshold`. Undefined precision / recall are 0,
/// and F1 is 0 when both are 0.
pub fn f1_at(scores: &[f64], labels: &[bool], threshold: f64) -> ThresholdReport {
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for (&s, &l) in scores.iter().zip(labels) {
        match (s >= threshold, l) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    from_counts(threshold, tp, fp, fn_, tn)
}

pub fn from_counts(threshold: f64, tp: usize, fp: usize, fn_: usize, tn: usize) -> ThresholdReport {
    let ratio = |a: usize, b: usize| if a + b == 0 { 0.0 } else { a as f64 / (a + b) as f64 };
    let precision = ratio(tp, fp);
    let recall = ratio(tp, fn_);
    ThresholdReport { threshold, tp, fp, fn_, tn, precision, recall, f1: f1_score(precision, recall) }
}

pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub auroc: f64,
    pub auprc: f64,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub n_pos: usize,
    pub n_neg: usize,
    pub threshold: f64,
}

pub const DEFAULT_THRESHOLD: f64 = 0.5;

pub fn evaluate(scores: &[f64], labels: &[bool], threshold: f64) -> Result<MetricsReport, MetricError> {
    let (n_pos, n_neg) = check(scores, labels)?;
    let t = f1_at(scores, labels, threshold);
    Ok(MetricsReport {
        auroc: auroc(scores, labels)?,
        auprc: auprc(scores, labels)?,
        f1: t.f1,
        precision: t.precision,
        recall: t.recall,
        n_pos,
        n_neg,
        threshold,
    })
}

/// Mean and sample standard deviation; `std` is 0 with `std_defined = false`
/// for a single value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
    pub std_defined: bool,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> MeanStd {
        let n = values.len();
        if n == 0 {
            return MeanStd { mean: f64::NAN, std: 0.0, n, std_defined: false };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        if n == 1 {
            return MeanStd { mean, std: 0.0, n, std_defined: false };
        }
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        MeanStd { mean, std: var.sqrt(), n, std_defined: true }
    }
}
