//! Execution strategy for the data-parallel loops (ensembles, drift tables,
//! fit grids).
//!
//! Every parallel loop in this crate is written so that its result does not
//! depend on scheduling: per-item work is a pure function of the item index
//! and reductions are exact (integer counts) or done in index order after
//! collection. Building without the `parallel` feature turns
//! [`Exec::Parallel`] into a sequential loop.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    /// True when this build can actually run work on a thread pool.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }

    /// Maps `f` over `0..len`, returning results in index order.
    pub fn map_indexed<T, F>(self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return (0..len).into_par_iter().map(f).collect();
        }
        (0..len).map(f).collect()
    }

    /// Folds `0..len` into accumulators and merges them. `merge` must be
    /// associative and commutative for the result to be schedule independent.
    pub fn fold_indexed<A, Init, Step, Merge>(
        self,
        len: u64,
        init: Init,
        step: Step,
        merge: Merge,
    ) -> A
    where
        A: Send,
        Init: Fn() -> A + Sync + Send,
        Step: Fn(A, u64) -> A + Sync + Send,
        Merge: Fn(A, A) -> A + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return (0..len)
                .into_par_iter()
                .fold(&init, &step)
                .reduce(&init, &merge);
        }
        let _ = &merge;
        (0..len).fold(init(), step)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_keeps_index_order() {
        for exec in [Exec::Sequential, Exec::Parallel] {
            let v = exec.map_indexed(1000, |i| i * i);
            assert!(v.iter().enumerate().all(|(i, &x)| x == i * i));
        }
    }

    #[test]
    fn fold_matches_sequential() {
        let seq = Exec::Sequential.fold_indexed(10_000, || 0u64, |a, i| a + i, |a, b| a + b);
        let par = Exec::Parallel.fold_indexed(10_000, || 0u64, |a, i| a + i, |a, b| a + b);
        assert_eq!(seq, par);
        assert_eq!(seq, 10_000 * 9_999 / 2);
    }
}
