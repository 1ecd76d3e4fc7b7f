use super::ops::{affine, axpy, dot, matvec_t_acc, outer_acc};
use super::tensor::{glorot_uniform, ParamId, Params, Tensor};
use super::NnError;

/// Fully connected layer `y = xW + b`, `W` stored as (input × output).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenseLayer {
    pub input: usize,
    pub output: usize,
    pub weight: ParamId,
    pub bias: ParamId,
    /// L2 coefficient on the weight matrix (bias is never penalized).
    pub l2: f64,
}

impl DenseLayer {
    pub fn new(params: &mut Params, name: &str, input: usize, output: usize, l2: f64, seed: u64) -> Self {
        let weight = params.add(format!("{name}.W"), glorot_uniform(&[input, output], input, output, seed));
        let bias = params.add(format!("{name}.b"), Tensor::zeros(&[output]));
        DenseLayer { input, output, weight, bias, l2 }
    }

    pub fn forward(&self, params: &Params, x: &[f64]) -> Result<Vec<f64>, NnError> {
        if x.len() != self.input {
            return Err(NnError::ShapeMismatch(format!("dense expects {} inputs, got {}", self.input, x.len())));
        }
        let mut y = vec![0.0; self.output];
        affine(x, params.get(self.weight).data(), params.get(self.bias).data(), &mut y);
        Ok(y)
    }

    /// Accumulates parameter gradients; returns ∂L/∂x when `want_dx`.
    pub fn backward(&self, params: &Params, x: &[f64], dy: &[f64], grads: &mut Params, want_dx: bool) -> Option<Vec<f64>> {
        outer_acc(x, dy, grads.get_mut(self.weight).data_mut());
        axpy(1.0, dy, grads.get_mut(self.bias).data_mut());
        want_dx.then(|| {
            let mut dx = vec![0.0; self.input];
            matvec_t_acc(params.get(self.weight).data(), dy, &mut dx);
            dx
        })
    }

    /// Forward for several inputs at once, streaming `W` a single time.
    pub fn forward_batch(&self, params: &Params, xs: &[&[f64]]) -> Result<Vec<Vec<f64>>, NnError> {
        if let Some(x) = xs.iter().find(|x| x.len() != self.input) {
            return Err(NnError::ShapeMismatch(format!("dense expects {} inputs, got {}", self.input, x.len())));
        }
        let w = params.get(self.weight).data();
        let b = params.get(self.bias).data();
        let mut ys: Vec<Vec<f64>> = xs.iter().map(|_| b.to_vec()).collect();
        for i in 0..self.input {
            let row = &w[i * self.output..(i + 1) * self.output];
            for (x, y) in xs.iter().zip(ys.iter_mut()) {
                if x[i] != 0.0 {
                    axpy(x[i], row, y);
                }
            }
        }
        Ok(ys)
    }

    /// Batched [`backward`](Self::backward). Per-element accumulation order
    /// is the sample order, as with repeated single calls.
    pub fn backward_batch(
        &self,
        params: &Params,
        xs: &[&[f64]],
        dys: &[&[f64]],
        grads: &mut Params,
        want_dx: bool,
    ) -> Option<Vec<Vec<f64>>> {
        let n = self.output;
        {
            let dw = grads.get_mut(self.weight).data_mut();
            for i in 0..self.input {
                let drow = &mut dw[i * n..(i + 1) * n];
                for (x, dy) in xs.iter().zip(dys) {
                    if x[i] != 0.0 {
                        axpy(x[i], dy, drow);
                    }
                }
            }
        }
        let db = grads.get_mut(self.bias).data_mut();
        for dy in dys {
            axpy(1.0, dy, db);
        }
        want_dx.then(|| {
            let w = params.get(self.weight).data();
            let mut dxs = vec![vec![0.0; self.input]; xs.len()];
            for i in 0..self.input {
                let row = &w[i * n..(i + 1) * n];
                for (dx, dy) in dxs.iter_mut().zip(dys) {
                    dx[i] += dot(row, dy);
                }
            }
            dxs
        })
    }

    pub fn l2_penalty(&self, params: &Params) -> f64 {
        if self.l2 == 0.0 {
            0.0
        } else {
            self.l2 * params.get(self.weight).sum_sq()
        }
    }

    /// Adds ∂(l2·‖W‖²)/∂W = 2·l2·W.
    pub fn l2_grad(&self, params: &Params, grads: &mut Params) {
        if self.l2 != 0.0 {
            axpy(2.0 * self.l2, params.get(self.weight).data(), grads.get_mut(self.weight).data_mut());
        }
    }
}
