//! Single-layer GRU:
//!
//! ```text
//! z_t = σ(W_z x_t + U_z h_{t-1} + b_z)
//! r_t = σ(W_r x_t + U_r h_{t-1} + b_r)
//! ĥ_t = tanh(W_h x_t + r_t ∘ (U_h h_{t-1}) + b_h)
//! h_t = z_t ∘ h_{t-1} + (1 - z_t) ∘ ĥ_t
//! ```
//!
//! `W_*` are stored as (input × hidden), `U_*` as (hidden × hidden), both
//! row-major, so `W x` is computed as `xᵀW`.

use super::ops::{axpy, matvec_t_acc, outer_acc, sigmoid, xw_acc};
use super::tensor::{glorot_uniform, ParamId, Params, Tensor};
use super::NnError;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GruCell {
    pub input: usize,
    pub hidden: usize,
    pub w_z: ParamId,
    pub u_z: ParamId,
    pub b_z: ParamId,
    pub w_r: ParamId,
    pub u_r: ParamId,
    pub b_r: ParamId,
    pub w_h: ParamId,
    pub u_h: ParamId,
    pub b_h: ParamId,
}

/// Per-step activations kept for backpropagation through time.
#[derive(Debug, Clone, Default)]
pub struct GruTrace {
    /// h_0 ..= h_T, each `hidden` long.
    pub h: Vec<Vec<f64>>,
    pub z: Vec<Vec<f64>>,
    pub r: Vec<Vec<f64>>,
    pub cand: Vec<Vec<f64>>,
    /// U_h h_{t-1}, before the reset gate.
    pub uh: Vec<Vec<f64>>,
}

impl GruTrace {
    pub fn last(&self) -> &[f64] {
        self.h.last().expect("trace holds h_0")
    }
}

impl GruCell {
    /// Registers parameters named `{prefix}.W_z` etc. Weights are
    /// Glorot-uniform, biases zero.
    pub fn new(params: &mut Params, prefix: &str, input: usize, hidden: usize, init_seed: u64) -> GruCell {
        let mut k = 0u64;
        let mut weight = |params: &mut Params, name: &str, rows: usize| {
            k += 1;
            let t = glorot_uniform(&[rows, hidden], rows, hidden, seed::derive(init_seed, k));
            params.add(format!("{prefix}.{name}"), t)
        };
        let w_z = weight(params, "W_z", input);
        let u_z = weight(params, "U_z", hidden);
        let w_r = weight(params, "W_r", input);
        let u_r = weight(params, "U_r", hidden);
        let w_h = weight(params, "W_h", input);
        let u_h = weight(params, "U_h", hidden);
        let b_z = params.add(format!("{prefix}.b_z"), Tensor::zeros(&[hidden]));
        let b_r = params.add(format!("{prefix}.b_r"), Tensor::zeros(&[hidden]));
        let b_h = params.add(format!("{prefix}.b_h"), Tensor::zeros(&[hidden]));
        GruCell { input, hidden, w_z, u_z, b_z, w_r, u_r, b_r, w_h, u_h, b_h }
    }

    pub fn param_count(input: usize, hidden: usize) -> usize {
        3 * (input * hidden + hidden * hidden + hidden)
    }

    /// Runs the cell over `x` (steps × input, row-major) from `h0`.
    pub fn forward(&self, params: &Params, x: &[f64], h0: &[f64]) -> Result<GruTrace, NnError> {
        let (nin, nh) = (self.input, self.hidden);
        if nin == 0 || x.len() % nin != 0 || h0.len() != nh {
            return Err(NnError::ShapeMismatch(format!(
                "gru expects steps×{nin} input and h0 of {nh}, got {} values and h0 of {}",
                x.len(),
                h0.len()
            )));
        }
        let steps = x.len() / nin;
        let p = |id: ParamId| params.get(id).data();
        let mut trace = GruTrace { h: vec![h0.to_vec()], ..Default::default() };
        for t in 0..steps {
            let xt = &x[t * nin..(t + 1) * nin];
            let hp = &trace.h[t];

            let mut z = p(self.b_z).to_vec();
            xw_acc(xt, p(self.w_z), &mut z);
            xw_acc(hp, p(self.u_z), &mut z);
            z.iter_mut().for_each(|a| *a = sigmoid(*a));

            let mut r = p(self.b_r).to_vec();
            xw_acc(xt, p(self.w_r), &mut r);
            xw_acc(hp, p(self.u_r), &mut r);
            r.iter_mut().for_each(|a| *a = sigmoid(*a));

            let mut uh = vec![0.0; nh];
            xw_acc(hp, p(self.u_h), &mut uh);
            let mut cand = p(self.b_h).to_vec();
            xw_acc(xt, p(self.w_h), &mut cand);
            for j in 0..nh {
                cand[j] = (cand[j] + r[j] * uh[j]).tanh();
            }

            let h: Vec<f64> = (0..nh).map(|j| z[j] * hp[j] + (1.0 - z[j]) * cand[j]).collect();
            if h.iter().any(|v| !v.is_finite()) {
                return Err(NnError::NonFiniteValue("gru hidden state"));
            }
            trace.z.push(z);
            trace.r.push(r);
            trace.uh.push(uh);
            trace.cand.push(cand);
            trace.h.push(h);
        }
        Ok(trace)
    }

    /// Backpropagation through time from `d_last` = ∂L/∂h_T. Parameter
    /// gradients are accumulated into `grads`; returns ∂L/∂h_0.
    pub fn backward(&self, params: &Params, x: &[f64], trace: &GruTrace, d_last: &[f64], grads: &mut Params) -> Vec<f64> {
        let (nin, nh) = (self.input, self.hidden);
        let steps = trace.z.len();
        let mut dh = d_last.to_vec();
        let mut da_h = vec![0.0; nh];
        let mut d_uh = vec![0.0; nh];
        let mut da_r = vec![0.0; nh];
        let mut da_z = vec![0.0; nh];
        for t in (0..steps).rev() {
            let xt = &x[t * nin..(t + 1) * nin];
            let hp = &trace.h[t];
            let (z, r, cand, uh) = (&trace.z[t], &trace.r[t], &trace.cand[t], &trace.uh[t]);
            let mut dh_prev = vec![0.0; nh];
            for j in 0..nh {
                let dz = dh[j] * (hp[j] - cand[j]);
                let dcand = dh[j] * (1.0 - z[j]);
                dh_prev[j] = dh[j] * z[j];
                da_h[j] = dcand * (1.0 - cand[j] * cand[j]);
                d_uh[j] = da_h[j] * r[j];
                let dr = da_h[j] * uh[j];
                da_r[j] = dr * r[j] * (1.0 - r[j]);
                da_z[j] = dz * z[j] * (1.0 - z[j]);
            }
            let p = |id: ParamId| params.get(id).data();
            // candidate: input path and bias see da_h, the recurrent path sees r ∘ da_h
            outer_acc(xt, &da_h, grads.get_mut(self.w_h).data_mut());
            axpy(1.0, &da_h, grads.get_mut(self.b_h).data_mut());
            outer_acc(hp, &d_uh, grads.get_mut(self.u_h).data_mut());
            matvec_t_acc(p(self.u_h), &d_uh, &mut dh_prev);
            for (w, u, b, g) in [(self.w_r, self.u_r, self.b_r, &da_r), (self.w_z, self.u_z, self.b_z, &da_z)] {
                outer_acc(xt, g, grads.get_mut(w).data_mut());
                axpy(1.0, g, grads.get_mut(b).data_mut());
                outer_acc(hp, g, grads.get_mut(u).data_mut());
                matvec_t_acc(p(u), g, &mut dh_prev);
            }
            dh = dh_prev;
        }
        dh
    }
}
