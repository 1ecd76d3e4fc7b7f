use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::seed;

/// Inverted-dropout mask: each unit is kept with probability `1 - rate` and
/// scaled by `1 / (1 - rate)`.
pub fn mask(n: usize, rate: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    assert!((0.0..1.0).contains(&rate), "dropout rate must be in [0, 1)");
    if rate == 0.0 {
        return vec![1.0; n];
    }
    let scale = 1.0 / (1.0 - rate);
    (0..n).map(|_| if rng.gen::<f64>() >= rate { scale } else { 0.0 }).collect()
}

/// Applies dropout when `train` is set; identity otherwise. Returns the
/// output and the mask used (all ones in eval mode).
pub fn dropout(x: &[f64], rate: f64, train: bool, seed: u64) -> (Vec<f64>, Vec<f64>) {
    if !train || rate == 0.0 {
        return (x.to_vec(), vec![1.0; x.len()]);
    }
    let m = mask(x.len(), rate, &mut seed::rng(seed));
    (x.iter().zip(&m).map(|(a, b)| a * b).collect(), m)
}
