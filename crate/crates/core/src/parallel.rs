//! Data-parallel map with a sequential fallback.
//!
//! Results always come back in input order, so output never depends on the
//! execution mode or on how work was scheduled across threads. Without the
//! `parallel` feature every mode runs on the calling thread.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Execution {
    Sequential,
    /// Global rayon pool.
    #[default]
    Parallel,
    /// Dedicated pool with this many threads.
    Workers(usize),
}

impl Execution {
    /// `0` means "all cores", `1` sequential.
    pub fn from_workers(workers: usize) -> Self {
        match workers {
            0 => Execution::Parallel,
            1 => Execution::Sequential,
            n => Execution::Workers(n),
        }
    }
}

/// Applies `f` to every item, returning results in input order.
pub fn par_map<T, R, F>(exec: Execution, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match exec {
        Execution::Sequential => items.iter().map(f).collect(),
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            items.par_iter().map(f).collect()
        }
        #[cfg(feature = "parallel")]
        Execution::Workers(n) => {
            use rayon::prelude::*;
            match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
                Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
                Err(_) => items.iter().map(f).collect(),
            }
        }
        #[cfg(not(feature = "parallel"))]
        Execution::Parallel | Execution::Workers(_) => items.iter().map(f).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree_and_keep_order() {
        let items: Vec<u64> = (0..500).collect();
        let sq = |x: &u64| x * x + 1;
        let a = par_map(Execution::Sequential, &items, sq);
        let b = par_map(Execution::Parallel, &items, sq);
        let c = par_map(Execution::Workers(3), &items, sq);
        assert_eq!(a, b);
        assert_eq!(a, c);
        assert_eq!(a[7], 50);
    }

    #[test]
    fn worker_flag() {
        assert_eq!(Execution::from_workers(0), Execution::Parallel);
        assert_eq!(Execution::from_workers(1), Execution::Sequential);
        assert_eq!(Execution::from_workers(6), Execution::Workers(6));
    }
}
