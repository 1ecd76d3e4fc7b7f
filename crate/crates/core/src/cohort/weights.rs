use serde::{Deserialize, Serialize};

use super::CohortError;
use crate::nn::ClassWeights;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum WeightMode {
    /// `w_c = N / (2·N_c)`
    Balanced,
    /// Fixed `w_neg = neg`, `w_pos = pos`.
    Ratio { neg: f64, pos: f64 },
    Unit,
}

pub fn class_weights(labels: &[bool], mode: WeightMode) -> Result<ClassWeights, CohortError> {
    let n = labels.len();
    let n_pos = labels.iter().filter(|&&y| y).count();
    let n_neg = n - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(CohortError::SingleClass);
    }
    match mode {
        WeightMode::Balanced => Ok(ClassWeights {
            w_pos: n as f64 / (2.0 * n_pos as f64),
            w_neg: n as f64 / (2.0 * n_neg as f64),
        }),
        WeightMode::Ratio { neg, pos } => {
            if !(neg > 0.0 && pos > 0.0 && neg.is_finite() && pos.is_finite()) {
                return Err(CohortError::Config(format!("class weights must be positive, got {neg}:{pos}")));
            }
            Ok(ClassWeights { w_pos: pos, w_neg: neg })
        }
        WeightMode::Unit => Ok(ClassWeights::UNIT),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(n: usize, pos: usize) -> Vec<bool> {
        (0..n).map(|i| i < pos).collect()
    }

    #[test]
    fn balanced_ten_percent() {
        let w = class_weights(&labels(100, 10), WeightMode::Balanced).unwrap();
        assert_eq!(w.w_pos, 5.0);
        assert_eq!(w.w_neg, 100.0 / 180.0);
        assert!((w.w_neg - 0.5556).abs() < 1e-4);
    }

    #[test]
    fn balanced_symmetric() {
        let w = class_weights(&labels(40, 20), WeightMode::Balanced).unwrap();
        assert_eq!((w.w_pos, w.w_neg), (1.0, 1.0));
    }

    #[test]
    fn ratio_one_to_five() {
        let w = class_weights(&labels(100, 3), WeightMode::Ratio { neg: 1.0, pos: 5.0 }).unwrap();
        assert_eq!((w.w_neg, w.w_pos), (1.0, 5.0));
    }

    #[test]
    fn single_class_rejected() {
        assert!(matches!(class_weights(&labels(5, 0), WeightMode::Balanced), Err(CohortError::SingleClass)));
        assert!(matches!(class_weights(&labels(5, 5), WeightMode::Unit), Err(CohortError::SingleClass)));
    }
}
