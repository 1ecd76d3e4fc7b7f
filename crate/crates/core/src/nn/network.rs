//! Baseline (GRU only) and multimodal (GRU + drug CNN) networks with a
//! hand-written backward pass.
//!
//! Multimodal layout:
//!
//! ```text
//! series (T×F) ─ GRU ─ h_T ───────────────────────────┐
//! drugs  (n×k) ─ conv→ReLU ×3 ─ global max pool ──────┴ concat ─ [dense→ReLU→dropout]* ─ dense(1) ─ σ
//! ```
//!
//! Baseline: `GRU → h_T → dense(1) → σ`. Drugs-only (debug): the CNN branch
//! alone feeding the same head.

use serde::{Deserialize, Serialize};

use super::conv::{Conv1dLayer, DrugRows};
use super::dense::DenseLayer;
use super::dropout;
use super::gru::{GruCell, GruTrace};
use super::loss::{bce_from_logit, ClassWeights};
use super::ops::{relu, sigmoid};
use super::pool::{global_max_pool, global_max_pool_backward};
use super::tensor::Params;
use super::NnError;
use crate::exec::Exec;
use crate::seed;

/// Samples per gradient chunk. Fixed so that sequential and parallel runs
/// sum gradients in the same order.
pub const GRAD_CHUNK: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Baseline,
    Multimodal,
    DrugsOnly,
}

impl Mode {
    pub fn uses_series(self) -> bool {
        self != Mode::DrugsOnly
    }

    pub fn uses_drugs(self) -> bool {
        self != Mode::Baseline
    }
}

/// Which dense weight matrices carry the L2 penalty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum L2Scope {
    #[default]
    AllDense,
    HiddenDense,
    OutputOnly,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub mode: Mode,
    /// Time-series features F.
    pub features: usize,
    /// Time steps T.
    pub steps: usize,
    pub hidden: usize,
    pub conv_filters: Vec<usize>,
    pub kernel: usize,
    pub fc: Vec<usize>,
    pub dropout: f64,
    pub l2: f64,
    #[serde(default)]
    pub l2_scope: L2Scope,
    /// Rows of the drug matrix n.
    pub n_drugs: usize,
    /// Drug representation width k.
    pub k: usize,
}

impl Architecture {
    pub fn paper(mode: Mode, features: usize) -> Architecture {
        Architecture {
            mode,
            features,
            steps: 24,
            hidden: 128,
            conv_filters: vec![32, 64, 128],
            kernel: 3,
            fc: vec![1024, 512, 256],
            dropout: 0.3,
            l2: 0.05,
            l2_scope: L2Scope::AllDense,
            n_drugs: 64,
            k: 1024,
        }
    }

    pub fn validate(&self) -> Result<(), NnError> {
        let bad = |m: &str| Err(NnError::Config(m.to_string()));
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must be in [0, 1)");
        }
        if self.l2 < 0.0 || !self.l2.is_finite() {
            return bad("l2 must be non-negative");
        }
        if self.mode.uses_series() && (self.features == 0 || self.steps == 0 || self.hidden == 0) {
            return bad("features, steps and hidden must be positive");
        }
        if self.mode.uses_drugs() {
            if self.conv_filters.is_empty() || self.conv_filters.contains(&0) || self.kernel == 0 {
                return bad("conv filters and kernel must be positive");
            }
            if self.n_drugs == 0 || self.k == 0 {
                return bad("n_drugs and k must be positive");
            }
            let reduce = self.conv_filters.len() * (self.kernel - 1);
            if self.n_drugs <= reduce {
                return bad("n_drugs too small for the conv stack");
            }
            if self.fc.contains(&0) {
                return bad("fc widths must be positive");
            }
        }
        Ok(())
    }

    /// Drug-axis length after the conv stack, before pooling.
    pub fn conv_output_len(&self) -> usize {
        self.n_drugs - self.conv_filters.len() * (self.kernel - 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub arch: Architecture,
    pub gru: Option<GruCell>,
    pub convs: Vec<Conv1dLayer>,
    pub fcs: Vec<DenseLayer>,
    pub out: DenseLayer,
}

/// One training or inference example.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    /// steps × features, row-major.
    pub series: &'a [f64],
    pub drugs: DrugRows<'a>,
    pub label: f64,
}

#[derive(Debug, Clone, Default)]
pub struct Trace {
    pub gru: Option<GruTrace>,
    /// Post-ReLU output of each conv layer.
    pub conv_out: Vec<Vec<f64>>,
    /// Stored rows per conv layer; the last one may stand for a constant tail.
    pub conv_len: Vec<usize>,
    pub pool_arg: Vec<usize>,
    /// Input to each FC layer and, last, to the output layer.
    pub fc_in: Vec<Vec<f64>>,
    /// Post-ReLU, pre-dropout FC activations.
    pub fc_act: Vec<Vec<f64>>,
    pub masks: Vec<Vec<f64>>,
    pub logit: f64,
}

impl Trace {
    pub fn prob(&self) -> f64 {
        sigmoid(self.logit)
    }
}

#[derive(Debug, Clone)]
pub struct BatchResult {
    /// Mean weighted BCE over the batch.
    pub data_loss: f64,
    /// L2 penalty term.
    pub penalty: f64,
    pub grads: Params,
    pub probs: Vec<f64>,
}

impl BatchResult {
    pub fn objective(&self) -> f64 {
        self.data_loss + self.penalty
    }
}

/// Per-chunk gradient buffers reused across batches.
#[derive(Debug, Clone)]
pub struct GradWorkspace {
    partial: Vec<Params>,
}

impl GradWorkspace {
    pub fn new(params: &Params, batch: usize) -> GradWorkspace {
        let mut ws = GradWorkspace { partial: Vec::new() };
        ws.reserve(params, batch);
        ws
    }

    fn reserve(&mut self, params: &Params, batch: usize) {
        let need = batch.div_ceil(GRAD_CHUNK).max(1);
        while self.partial.len() < need {
            self.partial.push(params.zeros_like());
        }
    }

    /// Gradient of the last batch.
    pub fn grads(&self) -> &Params {
        &self.partial[0]
    }

    pub fn into_grads(mut self) -> Params {
        self.partial.swap_remove(0)
    }
}

impl Network {
    pub fn build(arch: &Architecture, init_seed: u64) -> Result<(Network, Params), NnError> {
        arch.validate()?;
        let mut params = Params::new();
        let init = |k: u64| seed::derive_path(init_seed, &[seed::tag::INIT, k]);

        let gru = arch
            .mode
            .uses_series()
            .then(|| GruCell::new(&mut params, "gru", arch.features, arch.hidden, init(1)));

        let mut convs = Vec::new();
        if arch.mode.uses_drugs() {
            let mut cin = arch.k;
            for (i, &f) in arch.conv_filters.iter().enumerate() {
                convs.push(Conv1dLayer::new(&mut params, &format!("conv{}", i + 1), cin, f, arch.kernel, init(10 + i as u64)));
                cin = f;
            }
        }

        let head_l2 = |output: bool| {
            let on = match arch.l2_scope {
                L2Scope::AllDense => true,
                L2Scope::HiddenDense => !output,
                L2Scope::OutputOnly => output,
                L2Scope::None => false,
            };
            if on {
                arch.l2
            } else {
                0.0
            }
        };

        let mut width = match arch.mode {
            Mode::Baseline => arch.hidden,
            Mode::Multimodal => arch.hidden + arch.conv_filters.last().copied().unwrap_or(0),
            Mode::DrugsOnly => arch.conv_filters.last().copied().unwrap_or(0),
        };
        let mut fcs = Vec::new();
        if arch.mode.uses_drugs() {
            for (i, &f) in arch.fc.iter().enumerate() {
                fcs.push(DenseLayer::new(&mut params, &format!("fc{}", i + 1), width, f, head_l2(false), init(20 + i as u64)));
                width = f;
            }
        }
        let out = DenseLayer::new(&mut params, "out", width, 1, head_l2(true), init(30));
        Ok((Network { arch: arch.clone(), gru, convs, fcs, out }, params))
    }

    /// Width of the vector entering the FC head.
    pub fn fused_width(&self) -> usize {
        self.fcs.first().map(|l| l.input).unwrap_or(self.out.input)
    }

    fn check_sample(&self, s: &Sample<'_>) -> Result<(), NnError> {
        let a = &self.arch;
        if a.mode.uses_series() && s.series.len() != a.steps * a.features {
            return Err(NnError::ShapeMismatch(format!(
                "series has {} values, expected {}×{}",
                s.series.len(),
                a.steps,
                a.features
            )));
        }
        if a.mode.uses_drugs() && s.drugs.len != a.n_drugs {
            return Err(NnError::ShapeMismatch(format!("drug matrix has {} rows, expected {}", s.drugs.len, a.n_drugs)));
        }
        Ok(())
    }

    /// Forward pass. `dropout_seed = Some(_)` enables training-mode dropout.
    pub fn forward(&self, params: &Params, s: &Sample<'_>, dropout_seed: Option<u64>) -> Result<Trace, NnError> {
        let seeds = dropout_seed.map(|d| [d]);
        Ok(self.forward_many(params, std::slice::from_ref(s), seeds.as_ref().map(|d| &d[..]))?.remove(0))
    }

    /// GRU and drug branches for one sample; returns the fused vector.
    fn branches(&self, params: &Params, s: &Sample<'_>, tr: &mut Trace) -> Result<Vec<f64>, NnError> {
        self.check_sample(s)?;
        let mut fused = Vec::with_capacity(self.fused_width());

        if let Some(gru) = &self.gru {
            let g = gru.forward(params, s.series, &vec![0.0; gru.hidden])?;
            fused.extend_from_slice(g.last());
            tr.gru = Some(g);
        }

        if !self.convs.is_empty() {
            // Every position from the drug count on sees only padding, so
            // each layer stores those positions once, as its last row.
            let count = s.drugs.idx.len().min(s.drugs.len);
            let mut full = s.drugs.len;
            let mut rows = 0;
            for (i, conv) in self.convs.iter().enumerate() {
                full = conv.output_len(full)?;
                let out_rows = full.min(count + 1);
                let mut y = if i == 0 {
                    conv.forward_sparse_rows(params, s.drugs, out_rows)?
                } else {
                    conv.forward_rows(params, &tr.conv_out[i - 1], rows, out_rows)?
                };
                y.iter_mut().for_each(|v| *v = relu(*v));
                rows = out_rows;
                tr.conv_out.push(y);
                tr.conv_len.push(rows);
            }
            let last = self.convs.last().unwrap();
            let (pooled, arg) = global_max_pool(tr.conv_out.last().unwrap(), rows, last.out_channels)?;
            fused.extend_from_slice(&pooled);
            tr.pool_arg = arg;
        }
        Ok(fused)
    }

    /// Forward over several samples; the dense head runs batched.
    pub fn forward_many(
        &self,
        params: &Params,
        samples: &[Sample<'_>],
        dropout_seeds: Option<&[u64]>,
    ) -> Result<Vec<Trace>, NnError> {
        let mut traces = vec![Trace::default(); samples.len()];
        let mut xs = Vec::with_capacity(samples.len());
        for (s, tr) in samples.iter().zip(traces.iter_mut()) {
            xs.push(self.branches(params, s, tr)?);
        }

        for (i, fc) in self.fcs.iter().enumerate() {
            let refs: Vec<&[f64]> = xs.iter().map(|x| x.as_slice()).collect();
            let acts = fc.forward_batch(params, &refs)?;
            let mut next = Vec::with_capacity(samples.len());
            for (j, (mut a, x)) in acts.into_iter().zip(xs).enumerate() {
                a.iter_mut().for_each(|v| *v = relu(*v));
                let mask = match dropout_seeds {
                    Some(seeds) if self.arch.dropout > 0.0 => {
                        dropout::mask(a.len(), self.arch.dropout, &mut seed::rng(seed::derive(seeds[j], i as u64)))
                    }
                    _ => vec![1.0; a.len()],
                };
                next.push(a.iter().zip(&mask).map(|(v, m)| v * m).collect());
                let tr = &mut traces[j];
                tr.fc_in.push(x);
                tr.fc_act.push(a);
                tr.masks.push(mask);
            }
            xs = next;
        }

        let refs: Vec<&[f64]> = xs.iter().map(|x| x.as_slice()).collect();
        let logits = self.out.forward_batch(params, &refs)?;
        for ((tr, x), z) in traces.iter_mut().zip(xs).zip(logits) {
            tr.logit = z[0];
            tr.fc_in.push(x);
            if !tr.logit.is_finite() {
                return Err(NnError::NonFiniteValue("logit"));
            }
        }
        Ok(traces)
    }

    /// Eval-mode probability.
    pub fn predict(&self, params: &Params, s: &Sample<'_>) -> Result<f64, NnError> {
        Ok(self.forward(params, s, None)?.prob())
    }

    /// Backward pass from ∂L/∂logit, accumulating into `grads`.
    pub fn backward(&self, params: &Params, s: &Sample<'_>, tr: &Trace, d_logit: f64, grads: &mut Params) {
        self.backward_many(params, std::slice::from_ref(s), std::slice::from_ref(tr), &[d_logit], grads);
    }

    /// Backward for [`forward_many`](Self::forward_many).
    pub fn backward_many(&self, params: &Params, samples: &[Sample<'_>], traces: &[Trace], d_logits: &[f64], grads: &mut Params) {
        let xs: Vec<&[f64]> = traces.iter().map(|t| t.fc_in.last().unwrap().as_slice()).collect();
        let dz: Vec<[f64; 1]> = d_logits.iter().map(|&d| [d]).collect();
        let dr: Vec<&[f64]> = dz.iter().map(|d| &d[..]).collect();
        let mut dxs = self.out.backward_batch(params, &xs, &dr, grads, true).unwrap();
        for (i, fc) in self.fcs.iter().enumerate().rev() {
            let d_pre: Vec<Vec<f64>> = dxs
                .iter()
                .zip(traces)
                .map(|(dx, tr)| {
                    dx.iter()
                        .zip(&tr.masks[i])
                        .zip(&tr.fc_act[i])
                        .map(|((d, m), a)| if *a > 0.0 { d * m } else { 0.0 })
                        .collect()
                })
                .collect();
            let xs: Vec<&[f64]> = traces.iter().map(|t| t.fc_in[i].as_slice()).collect();
            let dr: Vec<&[f64]> = d_pre.iter().map(|d| d.as_slice()).collect();
            dxs = fc.backward_batch(params, &xs, &dr, grads, true).unwrap();
        }
        for ((s, tr), dx) in samples.iter().zip(traces).zip(&dxs) {
            self.branches_backward(params, s, tr, dx, grads);
        }
    }

    fn branches_backward(&self, params: &Params, s: &Sample<'_>, tr: &Trace, dx: &[f64], grads: &mut Params) {
        let hidden = self.gru.map(|g| g.hidden).unwrap_or(0);
        if !self.convs.is_empty() {
            let d_pooled = &dx[hidden..];
            let n_conv = self.convs.len();
            let mut dy = global_max_pool_backward(d_pooled, &tr.pool_arg, tr.conv_len[n_conv - 1]);
            for i in (0..n_conv).rev() {
                let conv = &self.convs[i];
                // ReLU mask from the stored post-activation output
                for (d, y) in dy.iter_mut().zip(&tr.conv_out[i]) {
                    if *y <= 0.0 {
                        *d = 0.0;
                    }
                }
                if i == 0 {
                    conv.backward_sparse(s.drugs, &dy, grads);
                } else {
                    let in_rows = tr.conv_len[i - 1];
                    let mut d_in = vec![0.0; in_rows * conv.in_channels];
                    conv.backward_rows(params, &tr.conv_out[i - 1], &dy, grads, Some(&mut d_in));
                    dy = d_in;
                }
            }
        }

        if let (Some(gru), Some(gtr)) = (&self.gru, &tr.gru) {
            gru.backward(params, s.series, gtr, &dx[..hidden], grads);
        }
    }

    fn dense_layers(&self) -> impl Iterator<Item = &DenseLayer> {
        self.fcs.iter().chain(std::iter::once(&self.out))
    }

    pub fn l2_penalty(&self, params: &Params) -> f64 {
        self.dense_layers().map(|l| l.l2_penalty(params)).sum()
    }

    /// Mean weighted BCE plus L2 penalty over `batch`, with gradients.
    /// `dropout_seeds`, when given, holds one seed per sample and turns on
    /// training-mode dropout.
    pub fn loss_and_grad(
        &self,
        params: &Params,
        batch: &[Sample<'_>],
        weights: ClassWeights,
        dropout_seeds: Option<&[u64]>,
        exec: Exec,
    ) -> Result<BatchResult, NnError> {
        let mut ws = GradWorkspace::new(params, batch.len());
        let (data_loss, penalty, probs) = self.loss_and_grad_into(params, batch, weights, dropout_seeds, exec, &mut ws)?;
        Ok(BatchResult { data_loss, penalty, grads: ws.into_grads(), probs })
    }

    /// [`loss_and_grad`](Self::loss_and_grad) writing the gradient into a
    /// reusable workspace (read it with [`GradWorkspace::grads`]). Returns
    /// (data loss, penalty, probabilities).
    pub fn loss_and_grad_into(
        &self,
        params: &Params,
        batch: &[Sample<'_>],
        weights: ClassWeights,
        dropout_seeds: Option<&[u64]>,
        exec: Exec,
        ws: &mut GradWorkspace,
    ) -> Result<(f64, f64, Vec<f64>), NnError> {
        if let Some(seeds) = dropout_seeds {
            assert_eq!(seeds.len(), batch.len());
        }
        ws.reserve(params, batch.len());
        let inv_b = 1.0 / batch.len().max(1) as f64;
        let indexed: Vec<usize> = (0..batch.len()).collect();
        let chunks = exec.map_chunks_with(&indexed, GRAD_CHUNK, &mut ws.partial, |ids, grads| -> Result<(f64, Vec<f64>), NnError> {
            grads.fill(0.0);
            let samples: Vec<Sample<'_>> = ids.iter().map(|&i| batch[i]).collect();
            let seeds: Option<Vec<u64>> = dropout_seeds.map(|d| ids.iter().map(|&i| d[i]).collect());
            let traces = self.forward_many(params, &samples, seeds.as_deref())?;
            let mut loss = 0.0;
            let mut probs = Vec::with_capacity(ids.len());
            let mut dz = Vec::with_capacity(ids.len());
            for (s, tr) in samples.iter().zip(&traces) {
                let (p, l, d) = bce_from_logit(tr.logit, s.label, weights);
                loss += l;
                probs.push(p);
                dz.push(d * inv_b);
            }
            self.backward_many(params, &samples, &traces, &dz, grads);
            Ok((loss, probs))
        });

        let mut total = 0.0;
        let mut probs = Vec::with_capacity(batch.len());
        let n_chunks = chunks.len();
        for chunk in chunks {
            let (l, p) = chunk?;
            total += l;
            probs.extend(p);
        }
        // fixed-order reduction of the chunk partials
        let (first, rest) = ws.partial.split_first_mut().expect("workspace has a buffer");
        if n_chunks == 0 {
            first.fill(0.0);
        }
        for g in &rest[..n_chunks.saturating_sub(1)] {
            first.add_assign(g);
        }
        for layer in self.dense_layers() {
            layer.l2_grad(params, first);
        }
        if let Some(name) = first.first_non_finite() {
            return Err(NnError::NonFiniteGradient(name.to_string()));
        }
        Ok((total * inv_b, self.l2_penalty(params), probs))
    }

    /// Objective value only (forward passes), matching
    /// [`loss_and_grad`](Self::loss_and_grad).
    pub fn objective(
        &self,
        params: &Params,
        batch: &[Sample<'_>],
        weights: ClassWeights,
        dropout_seeds: Option<&[u64]>,
    ) -> Result<f64, NnError> {
        let mut total = 0.0;
        for (c, chunk) in batch.chunks(GRAD_CHUNK).enumerate() {
            let seeds = dropout_seeds.map(|d| &d[c * GRAD_CHUNK..c * GRAD_CHUNK + chunk.len()]);
            for (s, tr) in chunk.iter().zip(self.forward_many(params, chunk, seeds)?) {
                total += bce_from_logit(tr.logit, s.label, weights).1;
            }
        }
        Ok(total / batch.len().max(1) as f64 + self.l2_penalty(params))
    }

    /// Eval-mode probabilities for many samples.
    pub fn predict_batch(&self, params: &Params, samples: &[Sample<'_>], exec: Exec) -> Result<Vec<f64>, NnError> {
        let chunks = exec.map_chunks(samples, GRAD_CHUNK, |c| -> Result<Vec<f64>, NnError> {
            Ok(self.forward_many(params, c, None)?.iter().map(Trace::prob).collect())
        });
        let mut out = Vec::with_capacity(samples.len());
        for c in chunks {
            out.extend(c?);
        }
        Ok(out)
    }
}
