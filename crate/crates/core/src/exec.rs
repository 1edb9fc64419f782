//! Sequential / data-parallel dispatch for batch loops.
//!
//! Label-setting itself is inherently sequential; what parallelizes is the
//! work around it (independent shots, per-node residuals, per-slice stencil
//! tables, batches of traces). Every such loop takes an [`Execution`] so the
//! two paths can be benchmarked against each other. Without the `parallel`
//! feature, [`Execution::Parallel`] silently degrades to sequential.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// True when this run will actually use the thread pool.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    /// Order-preserving map over a slice.
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return items.par_iter().map(f).collect();
        }
        items.iter().map(f).collect()
    }

    /// Order-preserving map over `0..n`.
    pub fn map_range<R, F>(self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Max of `f(i)` over `0..n`; NaN-free inputs assumed. Empty range gives
    /// `identity`.
    pub fn max_range<F>(self, n: usize, identity: f64, f: F) -> f64
    where
        F: Fn(usize) -> f64 + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return (0..n)
                .into_par_iter()
                .with_min_len(4096)
                .map(f)
                .reduce(|| identity, f64::max);
        }
        (0..n).map(f).fold(identity, f64::max)
    }
}
