//! Data-parallel execution with a sequential fallback.
//!
//! Work is always split into the same fixed chunks and results come back in
//! chunk order, so both paths produce bit-identical output. With the
//! `parallel` feature disabled, [`Exec::Parallel`] runs sequentially.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    /// Whether this build can actually run work concurrently.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }

    /// Ordered map over `items`.
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Exec::Parallel {
            use rayon::prelude::*;
            return items.par_iter().map(f).collect();
        }
        items.iter().map(f).collect()
    }

    /// Ordered map over `0..n`.
    pub fn map_range<R, F>(self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Exec::Parallel {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Ordered map over fixed-size chunks of `items`.
    pub fn map_chunks<T, R, F>(self, items: &[T], chunk: usize, f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&[T]) -> R + Sync + Send,
    {
        let chunk = chunk.max(1);
        #[cfg(feature = "parallel")]
        if self == Exec::Parallel {
            use rayon::prelude::*;
            return items.par_chunks(chunk).map(f).collect();
        }
        items.chunks(chunk).map(f).collect()
    }

    /// Like [`map_chunks`](Self::map_chunks), handing chunk `i` the scratch
    /// buffer `bufs[i]`. `bufs` must hold at least one buffer per chunk.
    pub fn map_chunks_with<T, B, R, F>(self, items: &[T], chunk: usize, bufs: &mut [B], f: F) -> Vec<R>
    where
        T: Sync,
        B: Send,
        R: Send,
        F: Fn(&[T], &mut B) -> R + Sync + Send,
    {
        let chunk = chunk.max(1);
        assert!(bufs.len() >= items.len().div_ceil(chunk), "not enough scratch buffers");
        #[cfg(feature = "parallel")]
        if self == Exec::Parallel {
            use rayon::prelude::*;
            return items.par_chunks(chunk).zip(bufs.par_iter_mut()).map(|(c, b)| f(c, b)).collect();
        }
        items.chunks(chunk).zip(bufs.iter_mut()).map(|(c, b)| f(c, b)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paths_agree() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64).sin()).collect();
        let sum = |c: &[f64]| c.iter().fold(0.0, |a, b| a + b);
        assert_eq!(
            Exec::Sequential.map_chunks(&xs, 7, sum),
            Exec::Parallel.map_chunks(&xs, 7, sum)
        );
        assert_eq!(Exec::Sequential.map(&xs, |x| x * 2.0), Exec::Parallel.map(&xs, |x| x * 2.0));
        assert_eq!(Exec::Sequential.map_range(5, |i| i * i), vec![0, 1, 4, 9, 16]);
        let mut a = vec![0.0; 143];
        let mut b = vec![0.0; 143];
        let scratch = |c: &[f64], acc: &mut f64| {
            *acc += sum(c);
            *acc
        };
        assert_eq!(
            Exec::Sequential.map_chunks_with(&xs, 7, &mut a, scratch),
            Exec::Parallel.map_chunks_with(&xs, 7, &mut b, scratch)
        );
    }
}
