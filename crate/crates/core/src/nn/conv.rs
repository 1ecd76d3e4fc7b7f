//! Valid (unpadded) 1D convolution along the drug axis, channels-last.
//! Kernels are stored as (kernel_size × in_channels × out_channels) so the
//! innermost loop runs over output channels.

use super::ops::{axpy, dot};
use super::tensor::{glorot_uniform, ParamId, Params, Tensor};
use super::NnError;

/// Nonzero entries of one input row.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseVec {
    pub idx: Vec<u32>,
    pub val: Vec<f64>,
}

impl SparseVec {
    pub fn from_dense(x: &[f64]) -> SparseVec {
        let mut s = SparseVec::default();
        for (i, &v) in x.iter().enumerate() {
            if v != 0.0 {
                s.idx.push(i as u32);
                s.val.push(v);
            }
        }
        s
    }

    pub fn nnz(&self) -> usize {
        self.idx.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.idx.iter().map(|&i| i as usize).zip(self.val.iter().copied())
    }
}

/// A zero-padded stack of `len` rows: row `i` is `table[idx[i]]` for
/// `i < idx.len()` and all-zero beyond.
#[derive(Debug, Clone, Copy)]
pub struct DrugRows<'a> {
    pub table: &'a [SparseVec],
    pub idx: &'a [u32],
    pub len: usize,
}

impl<'a> DrugRows<'a> {
    pub fn row(&self, i: usize) -> Option<&'a SparseVec> {
        self.idx.get(i).map(|&k| &self.table[k as usize])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conv1dLayer {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_size: usize,
    pub kernels: ParamId,
    pub bias: ParamId,
}

impl Conv1dLayer {
    pub fn new(params: &mut Params, name: &str, in_channels: usize, out_channels: usize, kernel_size: usize, seed: u64) -> Self {
        assert!(kernel_size >= 1);
        let shape = [kernel_size, in_channels, out_channels];
        let w = glorot_uniform(&shape, in_channels * kernel_size, out_channels * kernel_size, seed);
        let kernels = params.add(format!("{name}.kernels"), w);
        let bias = params.add(format!("{name}.bias"), Tensor::zeros(&[out_channels]));
        Conv1dLayer { in_channels, out_channels, kernel_size, kernels, bias }
    }

    pub fn output_len(&self, input_len: usize) -> Result<usize, NnError> {
        if input_len < self.kernel_size {
            return Err(NnError::InputTooShort { len: input_len, kernel: self.kernel_size });
        }
        Ok(input_len - self.kernel_size + 1)
    }

    /// `x` is (len × in_channels) row-major; returns (len-k+1 × out_channels)
    /// before any activation.
    pub fn forward(&self, params: &Params, x: &[f64], len: usize) -> Result<Vec<f64>, NnError> {
        let lout = self.output_len(len)?;
        self.forward_rows(params, x, len, lout)
    }

    /// Forward over a compacted input whose last stored row stands for a
    /// constant tail of any length: window indices past `in_rows - 1` are
    /// clamped onto it. Computes `out_rows` output positions.
    pub fn forward_rows(&self, params: &Params, x: &[f64], in_rows: usize, out_rows: usize) -> Result<Vec<f64>, NnError> {
        let (cin, cout, k) = (self.in_channels, self.out_channels, self.kernel_size);
        if x.len() != in_rows * cin || in_rows == 0 {
            return Err(NnError::ShapeMismatch(format!("conv expects {in_rows}×{cin} input, got {} values", x.len())));
        }
        let w = params.get(self.kernels).data();
        let b = params.get(self.bias).data();
        let mut y = vec![0.0; out_rows * cout];
        for t in 0..out_rows {
            let yt = &mut y[t * cout..(t + 1) * cout];
            yt.copy_from_slice(b);
            for j in 0..k {
                let r = (t + j).min(in_rows - 1);
                let row = &x[r * cin..(r + 1) * cin];
                for (c, &v) in row.iter().enumerate() {
                    if v != 0.0 {
                        axpy(v, &w[(j * cin + c) * cout..(j * cin + c + 1) * cout], yt);
                    }
                }
            }
        }
        Ok(y)
    }

    /// Same as [`forward`](Self::forward) over sparse zero-padded rows.
    pub fn forward_sparse(&self, params: &Params, rows: DrugRows<'_>) -> Result<Vec<f64>, NnError> {
        let lout = self.output_len(rows.len)?;
        self.forward_sparse_rows(params, rows, lout)
    }

    /// First `out_rows` output positions over sparse rows.
    pub fn forward_sparse_rows(&self, params: &Params, rows: DrugRows<'_>, out_rows: usize) -> Result<Vec<f64>, NnError> {
        let (cin, cout, k) = (self.in_channels, self.out_channels, self.kernel_size);
        let lout = out_rows;
        let w = params.get(self.kernels).data();
        let b = params.get(self.bias).data();
        let mut y = vec![0.0; lout * cout];
        for t in 0..lout {
            let yt = &mut y[t * cout..(t + 1) * cout];
            yt.copy_from_slice(b);
            for j in 0..k {
                let Some(row) = rows.row(t + j) else { break };
                for (c, v) in row.iter() {
                    if c >= cin {
                        return Err(NnError::ShapeMismatch(format!("drug row channel {c} ≥ {cin}")));
                    }
                    axpy(v, &w[(j * cin + c) * cout..(j * cin + c + 1) * cout], yt);
                }
            }
        }
        Ok(y)
    }

    /// Accumulates kernel/bias gradients from `dy` (len_out × out_channels)
    /// and, when `dx` is given, the input gradient (len × in_channels).
    pub fn backward(&self, params: &Params, x: &[f64], dy: &[f64], grads: &mut Params, dx: Option<&mut [f64]>) {
        self.backward_rows(params, x, dy, grads, dx)
    }

    /// Backward for [`forward_rows`](Self::forward_rows); input rows are
    /// `x.len() / in_channels` and clamped windows send their gradient to
    /// the last stored row.
    pub fn backward_rows(&self, params: &Params, x: &[f64], dy: &[f64], grads: &mut Params, mut dx: Option<&mut [f64]>) {
        let (cin, cout, k) = (self.in_channels, self.out_channels, self.kernel_size);
        let lout = dy.len() / cout;
        let in_rows = x.len() / cin;
        {
            let db = grads.get_mut(self.bias).data_mut();
            for t in 0..lout {
                axpy(1.0, &dy[t * cout..(t + 1) * cout], db);
            }
        }
        let dw = grads.get_mut(self.kernels).data_mut();
        for t in 0..lout {
            let g = &dy[t * cout..(t + 1) * cout];
            if g.iter().all(|v| *v == 0.0) {
                continue;
            }
            for j in 0..k {
                let r = (t + j).min(in_rows - 1);
                let row = &x[r * cin..(r + 1) * cin];
                for (c, &v) in row.iter().enumerate() {
                    if v != 0.0 {
                        axpy(v, g, &mut dw[(j * cin + c) * cout..(j * cin + c + 1) * cout]);
                    }
                }
            }
        }
        if let Some(dx) = dx.as_deref_mut() {
            let w = params.get(self.kernels).data();
            for t in 0..lout {
                let g = &dy[t * cout..(t + 1) * cout];
                if g.iter().all(|v| *v == 0.0) {
                    continue;
                }
                for j in 0..k {
                    let r = (t + j).min(in_rows - 1);
                    for c in 0..cin {
                        dx[r * cin + c] += dot(&w[(j * cin + c) * cout..(j * cin + c + 1) * cout], g);
                    }
                }
            }
        }
    }

    /// Kernel/bias gradients for a sparse input (no input gradient).
    pub fn backward_sparse(&self, rows: DrugRows<'_>, dy: &[f64], grads: &mut Params) {
        let (cin, cout, k) = (self.in_channels, self.out_channels, self.kernel_size);
        let lout = dy.len() / cout;
        {
            let db = grads.get_mut(self.bias).data_mut();
            for t in 0..lout {
                axpy(1.0, &dy[t * cout..(t + 1) * cout], db);
            }
        }
        let dw = grads.get_mut(self.kernels).data_mut();
        for t in 0..lout {
            let g = &dy[t * cout..(t + 1) * cout];
            if g.iter().all(|v| *v == 0.0) {
                continue;
            }
            for j in 0..k {
                let Some(row) = rows.row(t + j) else { break };
                for (c, v) in row.iter() {
                    axpy(v, g, &mut dw[(j * cin + c) * cout..(j * cin + c + 1) * cout]);
                }
            }
        }
    }
}
