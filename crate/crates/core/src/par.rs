//! Deterministic data-parallel helpers.
//!
//! Every Monte-Carlo trial and optimizer restart draws from its own RNG
//! stream derived from `(seed, index)`, and results are reduced in index
//! order, so output never depends on the worker count or on whether the
//! `parallel` feature is enabled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How an indexed batch of independent tasks is executed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Rayon work-stealing; falls back to sequential without the `parallel` feature.
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

/// RNG stream for task `index` under `seed`.
pub fn task_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// `f(0), ..., f(n-1)` in index order.
pub fn map_indexed<T, F>(n: usize, exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => (0..n).into_par_iter().map(f).collect(),
        _ => (0..n).map(f).collect(),
    }
}

/// Number of indices in `0..n` for which `f` holds.
pub fn count_indexed<F>(n: usize, exec: Execution, f: F) -> usize
where
    F: Fn(usize) -> bool + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => (0..n).into_par_iter().filter(|&i| f(i)).count(),
        _ => (0..n).filter(|&i| f(i)).count(),
    }
}

/// Runs `f` on a pool bounded to `threads` workers (when given and the
/// `parallel` feature is on); otherwise runs it on the current pool.
pub fn with_threads<R, F>(threads: Option<usize>, f: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    #[cfg(feature = "parallel")]
    if let Some(n) = threads {
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build() {
            return pool.install(f);
        }
    }
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
    f()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_distinct_and_reproducible() {
        let a: u64 = task_rng(1, 0).random();
        let b: u64 = task_rng(1, 1).random();
        let c: u64 = task_rng(2, 0).random();
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, task_rng(1, 0).random::<u64>());
    }

    #[test]
    fn execution_modes_agree() {
        let f = |i: usize| task_rng(9, i as u64).random::<u32>();
        let seq = map_indexed(500, Execution::Sequential, f);
        let par = map_indexed(500, Execution::Parallel, f);
        assert_eq!(seq, par);
        let pred = |i: usize| task_rng(9, i as u64).random_bool(0.3);
        assert_eq!(
            count_indexed(2000, Execution::Sequential, pred),
            with_threads(Some(3), || count_indexed(2000, Execution::Parallel, pred))
        );
    }
}
