use super::NnError;

/// Per-channel maximum over the length axis of (len × channels). Ties go to
/// the lowest index, which also receives the whole gradient.
pub fn global_max_pool(x: &[f64], len: usize, channels: usize) -> Result<(Vec<f64>, Vec<usize>), NnError> {
    if len == 0 || channels == 0 {
        return Err(NnError::EmptyInput);
    }
    if x.len() != len * channels {
        return Err(NnError::ShapeMismatch(format!("pool expects {len}×{channels}, got {} values", x.len())));
    }
    let mut out = x[..channels].to_vec();
    let mut arg = vec![0usize; channels];
    for t in 1..len {
        for c in 0..channels {
            let v = x[t * channels + c];
            if v > out[c] {
                out[c] = v;
                arg[c] = t;
            }
        }
    }
    Ok((out, arg))
}

/// Scatters pooled gradients back to the argmax positions.
pub fn global_max_pool_backward(d_out: &[f64], arg: &[usize], len: usize) -> Vec<f64> {
    let channels = d_out.len();
    let mut dx = vec![0.0; len * channels];
    for c in 0..channels {
        dx[arg[c] * channels + c] = d_out[c];
    }
    dx
}
