//! Scalar helpers. Reductions use four fixed partial sums so results do not
//! depend on the compiler's vectorization choices.

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        let k = 4 * i;
        acc[0] += a[k] * b[k];
        acc[1] += a[k + 1] * b[k + 1];
        acc[2] += a[k + 2] * b[k + 2];
        acc[3] += a[k + 3] * b[k + 3];
    }
    let mut tail = 0.0;
    for k in 4 * chunks..a.len() {
        tail += a[k] * b[k];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// ReLU'(x), with ReLU'(0) = 0.
#[inline]
pub fn relu_grad(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        0.0
    }
}

/// `out = b + x · W` for `W` stored row-major as (x.len() × out.len()).
/// Zero inputs are skipped.
#[inline]
pub fn affine(x: &[f64], w: &[f64], b: &[f64], out: &mut [f64]) {
    let n_out = b.len();
    debug_assert_eq!(w.len(), x.len() * n_out);
    out.copy_from_slice(b);
    xw_acc(x, w, out);
}

/// `out += xᵀW` for `W` stored row-major as (x.len() × out.len()).
#[inline]
pub fn xw_acc(x: &[f64], w: &[f64], out: &mut [f64]) {
    let n_out = out.len();
    debug_assert_eq!(w.len(), x.len() * n_out);
    for (i, &xi) in x.iter().enumerate() {
        if xi != 0.0 {
            axpy(xi, &w[i * n_out..(i + 1) * n_out], out);
        }
    }
}

/// `dW += x ⊗ g`, zero inputs skipped.
#[inline]
pub fn outer_acc(x: &[f64], g: &[f64], dw: &mut [f64]) {
    let n = g.len();
    for (i, &xi) in x.iter().enumerate() {
        if xi != 0.0 {
            axpy(xi, g, &mut dw[i * n..(i + 1) * n]);
        }
    }
}

/// `dx[i] += W[i,:] · g`
#[inline]
pub fn matvec_t_acc(w: &[f64], g: &[f64], dx: &mut [f64]) {
    let n = g.len();
    for (i, d) in dx.iter_mut().enumerate() {
        *d += dot(&w[i * n..(i + 1) * n], g);
    }
}
