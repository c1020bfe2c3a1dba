//! Execution strategy for the data-parallel loops (grid search, Monte Carlo
//! suites, escape demo, per-UAV control evaluation).
//!
//! Every parallel map preserves input order, so results are identical to the
//! sequential path regardless of thread count. Without the `parallel` feature
//! `Exec::Parallel` silently falls back to the sequential loop.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    /// `Parallel` when more than one thread is requested.
    pub fn from_threads(threads: usize) -> Self {
        if threads > 1 {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }

    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }

    /// Order-preserving map over a slice.
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Exec::Parallel {
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
        if self == Exec::Parallel {
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }
}

pub fn num_threads() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_map_matches_sequential() {
        let xs: Vec<f64> = (0..1000).map(|i| i as f64 * 0.37).collect();
        let f = |x: &f64| (x.sin() * 1e3).to_bits();
        assert_eq!(Exec::Sequential.map(&xs, f), Exec::Parallel.map(&xs, f));
        assert_eq!(
            Exec::Sequential.map_range(257, |i| i * i),
            Exec::Parallel.map_range(257, |i| i * i)
        );
    }

    #[test]
    fn thread_count_selects_strategy() {
        assert_eq!(Exec::from_threads(0), Exec::Sequential);
        assert_eq!(Exec::from_threads(1), Exec::Sequential);
        assert_eq!(Exec::from_threads(8), Exec::Parallel);
    }
}
