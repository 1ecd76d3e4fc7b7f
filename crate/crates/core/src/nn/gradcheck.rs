//! Central-difference gradient verification.

use serde::Serialize;

use super::loss::ClassWeights;
use super::network::{Network, Sample};
use super::tensor::Params;
use super::NnError;
use crate::exec::Exec;

pub const FD_STEP: f64 = 1e-5;

/// Gradients smaller than this are compared on an absolute scale.
const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct TensorCheck {
    pub name: String,
    pub checked: usize,
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub tolerance: f64,
    pub tensors: Vec<TensorCheck>,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.tensors.iter().map(|t| t.max_rel_error).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.tensors.iter().all(|t| t.max_rel_error < self.tolerance)
    }

    pub fn failures(&self) -> Vec<&str> {
        self.tensors
            .iter()
            .filter(|t| !(t.max_rel_error < self.tolerance))
            .map(|t| t.name.as_str())
            .collect()
    }
}

pub fn rel_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(REL_FLOOR)
}

/// Check the analytic gradient of the full objective (weighted BCE + L2)
/// against central differences, for every element of every tensor.
pub fn grad_check(
    net: &Network,
    params: &Params,
    batch: &[Sample<'_>],
    weights: ClassWeights,
    dropout_seeds: Option<&[u64]>,
    tolerance: f64,
) -> Result<GradCheckReport, NnError> {
    let analytic = net.loss_and_grad(params, batch, weights, dropout_seeds, Exec::Sequential)?.grads;
    grad_check_against(net, params, batch, weights, dropout_seeds, tolerance, &analytic)
}

/// Like [`grad_check`] but compares against caller-supplied gradients.
pub fn grad_check_against(
    net: &Network,
    params: &Params,
    batch: &[Sample<'_>],
    weights: ClassWeights,
    dropout_seeds: Option<&[u64]>,
    tolerance: f64,
    analytic: &Params,
) -> Result<GradCheckReport, NnError> {
    if !params.same_layout(analytic) {
        return Err(NnError::ShapeMismatch("gradient layout differs from parameters".into()));
    }
    let mut probe = params.clone();
    let mut tensors = Vec::with_capacity(params.len());
    for (ti, name) in params.names().iter().enumerate() {
        let mut check = TensorCheck {
            name: name.clone(),
            checked: 0,
            max_rel_error: 0.0,
            worst_index: 0,
            analytic: 0.0,
            numeric: 0.0,
        };
        for j in 0..params.tensors()[ti].len() {
            let orig = params.tensors()[ti].data()[j];
            probe.tensors_mut()[ti].data_mut()[j] = orig + FD_STEP;
            let up = net.objective(&probe, batch, weights, dropout_seeds)?;
            probe.tensors_mut()[ti].data_mut()[j] = orig - FD_STEP;
            let down = net.objective(&probe, batch, weights, dropout_seeds)?;
            probe.tensors_mut()[ti].data_mut()[j] = orig;

            let n = (up - down) / (2.0 * FD_STEP);
            let a = analytic.tensors()[ti].data()[j];
            let e = rel_error(a, n);
            check.checked += 1;
            if e > check.max_rel_error || e.is_nan() {
                check.max_rel_error = e;
                check.worst_index = j;
                check.analytic = a;
                check.numeric = n;
            }
        }
        tensors.push(check);
    }
    Ok(GradCheckReport { tolerance, tensors })
}
