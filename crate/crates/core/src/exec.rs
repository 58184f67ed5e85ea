//! Execution policy for the data-parallel inner loops (Monte Carlo trials,
//! exponent grid search).
//!
//! Both policies produce bit-identical results: work items are pure functions
//! of their index and are collected back in index order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Exec {
    #[cfg_attr(not(feature = "parallel"), default)]
    Sequential,
    #[cfg(feature = "parallel")]
    #[default]
    Parallel,
}

impl Exec {
    /// Evaluates `f(0..n)` and returns the results in index order.
    pub fn map_indexed<T, F>(self, n: u64, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send,
    {
        match self {
            Exec::Sequential => (0..n).map(f).collect(),
            #[cfg(feature = "parallel")]
            Exec::Parallel => (0..n).into_par_iter().map(f).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preserves_index_order() {
        let out = Exec::default().map_indexed(1000, |i| i * 3);
        assert_eq!(out, (0..1000).map(|i| i * 3).collect::<Vec<_>>());
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn policies_agree() {
        let f = |i: u64| ((i as f64) * 0.37).sin();
        assert_eq!(
            Exec::Sequential.map_indexed(5000, f),
            Exec::Parallel.map_indexed(5000, f)
        );
    }
}
