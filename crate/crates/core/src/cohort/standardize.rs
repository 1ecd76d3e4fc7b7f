use serde::{Deserialize, Serialize};

use super::TimeSeries;

/// Per-feature z-scoring fitted on training patients only. Features with
/// zero spread are centered but not scaled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    /// Population standard deviation over all training hours.
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit<'a>(series: impl IntoIterator<Item = &'a TimeSeries> + Clone) -> Standardizer {
        let f = series.clone().into_iter().next().map(|s| s.features).unwrap_or(0);
        let mut mean = vec![0.0; f];
        let mut n = 0usize;
        for s in series.clone() {
            for row in s.values.chunks_exact(f) {
                for (m, v) in mean.iter_mut().zip(row) {
                    *m += v;
                }
                n += 1;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n.max(1) as f64);
        let mut var = vec![0.0; f];
        for s in series {
            for row in s.values.chunks_exact(f) {
                for ((acc, v), m) in var.iter_mut().zip(row).zip(&mean) {
                    *acc += (v - m) * (v - m);
                }
            }
        }
        let std = var.into_iter().map(|v| (v / n.max(1) as f64).sqrt()).collect();
        Standardizer { mean, std }
    }

    pub fn identity(features: usize) -> Standardizer {
        Standardizer { mean: vec![0.0; features], std: vec![1.0; features] }
    }

    pub fn apply(&self, s: &TimeSeries) -> TimeSeries {
        let f = s.features;
        let mut values = s.values.clone();
        for row in values.chunks_exact_mut(f) {
            for ((v, m), sd) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                *v -= m;
                if *sd > 0.0 {
                    *v /= sd;
                }
            }
        }
        TimeSeries { features: f, values }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::HOURS;

    fn series(f: impl Fn(usize, usize) -> f64, features: usize) -> TimeSeries {
        let values = (0..HOURS * features).map(|i| f(i / features, i % features)).collect();
        TimeSeries { features, values }
    }

    #[test]
    fn constant_feature_is_centered_only() {
        let s = series(|h, j| if j == 0 { 7.0 } else { h as f64 }, 2);
        let st = Standardizer::fit([&s]);
        assert_eq!(st.std[0], 0.0);
        let out = st.apply(&s);
        assert!(out.values.iter().step_by(2).all(|&v| v == 0.0));
    }

    #[test]
    fn train_statistics_applied_unchanged() {
        let train = series(|h, _| h as f64, 1);
        let test = series(|h, _| 100.0 + 3.0 * h as f64, 1);
        let st = Standardizer::fit([&train]);
        let out = st.apply(&test);
        for (h, v) in out.values.iter().enumerate() {
            let want = (100.0 + 3.0 * h as f64 - st.mean[0]) / st.std[0];
            assert_eq!(*v, want);
        }
        // the test set's own statistics would differ
        assert_ne!(Standardizer::fit([&test]), st);
    }
}
