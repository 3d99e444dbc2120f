//! Deterministic execution helpers for data-parallel kernels.
//!
//! Every reduction in this crate runs over a fixed set of partitions whose
//! count depends only on the problem size, never on the thread count. Each
//! partition is accumulated sequentially with compensated summation and the
//! partials are combined in partition order. The parallel and sequential
//! paths therefore produce bit-identical results; parallelism only changes
//! wall-clock time.

use std::sync::atomic::{AtomicBool, Ordering};

static PARALLEL: AtomicBool = AtomicBool::new(cfg!(feature = "parallel"));

/// Enable or disable the rayon path at runtime. A no-op without the
/// `parallel` feature. Results do not depend on this switch.
pub fn set_parallel(enabled: bool) {
    PARALLEL.store(enabled && cfg!(feature = "parallel"), Ordering::Relaxed);
}

pub fn parallel_enabled() -> bool {
    PARALLEL.load(Ordering::Relaxed)
}

/// Number of reduction partitions for a workload of `items` units.
/// A pure function of the problem size so that results are reproducible
/// across thread counts and across the sequential fallback.
pub fn partition_count(items: usize) -> usize {
    if items < 2048 {
        1
    } else {
        32
    }
}

/// Half-open index range of partition `p` out of `nparts` over `len` items.
pub fn part_range(len: usize, nparts: usize, p: usize) -> std::ops::Range<usize> {
    let per = len.div_ceil(nparts.max(1));
    let start = (p * per).min(len);
    let end = ((p + 1) * per).min(len);
    start..end
}

/// Evaluate `f` on every partition index and collect the results in order.
/// Runs on the rayon pool when the parallel path is active.
pub fn map_partitions<T, F>(nparts: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if nparts > 1 && parallel_enabled() {
            use rayon::prelude::*;
            return (0..nparts).into_par_iter().map(f).collect();
        }
    }
    (0..nparts).map(f).collect()
}

/// Neumaier compensated accumulator. Keeps long sums accurate to a few ulps
/// independently of the number of terms.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.add(other.comp);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Deterministic partitioned dot product.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let nparts = partition_count(a.len());
    let partials = map_partitions(nparts, |p| {
        let r = part_range(a.len(), nparts, p);
        let mut acc = CompensatedSum::new();
        for i in r {
            acc.add(a[i] * b[i]);
        }
        acc
    });
    let mut total = CompensatedSum::new();
    for part in &partials {
        total.merge(part);
    }
    total.value()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).max(0.0).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    let mut m = 0.0f64;
    for &v in a {
        m = m.max(v.abs());
    }
    m
}

/// y += s * x
pub fn axpy(y: &mut [f64], s: f64, x: &[f64]) {
    debug_assert_eq!(y.len(), x.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += s * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partitioned_dot_matches_either_mode() {
        let n = 10_000;
        let a: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.11).cos()).collect();
        let was = parallel_enabled();
        set_parallel(false);
        let seq = dot(&a, &b);
        set_parallel(true);
        let par = dot(&a, &b);
        set_parallel(was);
        assert_eq!(seq.to_bits(), par.to_bits());
    }

    #[test]
    fn compensated_sum_beats_naive_on_long_sums() {
        let mut acc = CompensatedSum::new();
        let n = 1_000_000;
        for _ in 0..n {
            acc.add(0.1);
        }
        let exact = 0.1 * n as f64;
        assert!((acc.value() - exact).abs() / exact < 1e-15);
    }

    #[test]
    fn part_ranges_cover_everything_once() {
        for len in [0usize, 1, 5, 2048, 4097] {
            let np = partition_count(len);
            let mut covered = 0;
            for p in 0..np {
                covered += part_range(len, np, p).len();
            }
            assert_eq!(covered, len);
        }
    }
}
