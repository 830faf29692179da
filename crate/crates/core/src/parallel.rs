//! Deterministic replicate-parallel driver.
//!
//! Replicates are grouped into fixed-size chunks whose boundaries do not
//! depend on the worker count. Each chunk folds its replicates in index
//! order and chunk results are merged in chunk order, so the final state is
//! bit-identical for any number of workers.

use crate::sampling::RngStream;
use rayon::prelude::*;

/// Replicates per chunk.
pub const CHUNK: u64 = 2048;

/// State that can absorb another state of the same kind.
pub trait Merge {
    fn merge(&mut self, other: Self);
}

/// Number of workers to use when the caller does not specify one.
pub fn default_workers() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

/// Runs `step` once per replicate `i in 0..reps` with the stream
/// `(seed, i)` and returns the merged state.
pub fn run_replicates<A, I, F>(reps: u64, seed: u64, workers: usize, init: I, step: F) -> A
where
    A: Merge + Send,
    I: Fn() -> A + Sync,
    F: Fn(&mut A, RngStream) + Sync,
{
    let chunks = reps.div_ceil(CHUNK);
    let run_chunk = |c: u64| {
        let mut acc = init();
        let end = ((c + 1) * CHUNK).min(reps);
        for i in c * CHUNK..end {
            step(&mut acc, RngStream::new(seed, i));
        }
        acc
    };
    let parts: Vec<A> = if workers <= 1 {
        (0..chunks).map(run_chunk).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .expect("thread pool");
        pool.install(|| (0..chunks).into_par_iter().map(run_chunk).collect())
    };
    let mut parts = parts.into_iter();
    let mut total = parts.next().unwrap_or_else(&init);
    for p in parts {
        total.merge(p);
    }
    total
}

/// Ordered map over `0..n` with `workers` threads.
pub fn map_indices<T, F>(n: u64, workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync,
{
    if workers <= 1 {
        (0..n).map(f).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .expect("thread pool");
        pool.install(|| (0..n).into_par_iter().map(&f).collect())
    }
}

impl Merge for crate::stats::RunningStats {
    fn merge(&mut self, other: Self) {
        crate::stats::RunningStats::merge(self, &other)
    }
}

impl<A: Merge> Merge for Vec<A> {
    fn merge(&mut self, other: Self) {
        debug_assert_eq!(self.len(), other.len());
        for (a, b) in self.iter_mut().zip(other) {
            a.merge(b);
        }
    }
}

impl Merge for u64 {
    fn merge(&mut self, other: Self) {
        *self += other;
    }
}

impl<A: Merge, B: Merge> Merge for (A, B) {
    fn merge(&mut self, other: Self) {
        self.0.merge(other.0);
        self.1.merge(other.1);
    }
}
