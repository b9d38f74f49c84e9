//! Deterministic parallel reduction over independent replicas.
//!
//! Replicas are grouped in fixed chunks of consecutive indices. Each chunk
//! is reduced sequentially and chunk results are combined in index order
//! with compensated sums, so results do not depend on the thread count.

use rayon::prelude::*;

use crate::stats::Neumaier;

pub const CHUNK: usize = 512;

/// Per-coordinate first and second moments of replica observations.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub count: usize,
    pub sum: Vec<f64>,
    pub sumsq: Vec<f64>,
}

impl Moments {
    pub fn mean(&self, i: usize) -> f64 {
        self.sum[i] / self.count as f64
    }

    /// Unbiased sample variance of coordinate `i`.
    pub fn variance(&self, i: usize) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let n = self.count as f64;
        let m = self.sum[i] / n;
        ((self.sumsq[i] - n * m * m) / (n - 1.0)).max(0.0)
    }

    pub fn stderr(&self, i: usize) -> f64 {
        (self.variance(i) / self.count as f64).sqrt()
    }

    pub fn width(&self) -> usize {
        self.sum.len()
    }
}

/// `f(replica, out)` fills a `width`-vector of observations per replica.
pub fn replica_moments<F>(replicas: usize, width: usize, f: F) -> Moments
where
    F: Fn(usize, &mut [f64]) + Sync,
{
    let chunks = replicas.div_ceil(CHUNK);
    let partial: Vec<(Vec<f64>, Vec<f64>)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut s = vec![0.0; width];
            let mut q = vec![0.0; width];
            let mut obs = vec![0.0; width];
            for r in c * CHUNK..((c + 1) * CHUNK).min(replicas) {
                obs.iter_mut().for_each(|v| *v = 0.0);
                f(r, &mut obs);
                for i in 0..width {
                    s[i] += obs[i];
                    q[i] += obs[i] * obs[i];
                }
            }
            (s, q)
        })
        .collect();
    let mut sum = vec![Neumaier::default(); width];
    let mut sumsq = vec![Neumaier::default(); width];
    for (s, q) in &partial {
        for i in 0..width {
            sum[i].add(s[i]);
            sumsq[i].add(q[i]);
        }
    }
    Moments {
        count: replicas,
        sum: sum.iter().map(Neumaier::value).collect(),
        sumsq: sumsq.iter().map(Neumaier::value).collect(),
    }
}

/// Histogram of `f(replica)` over `bins` bins.
pub fn replica_histogram<F>(replicas: usize, bins: usize, f: F) -> Vec<u64>
where
    F: Fn(usize) -> usize + Sync,
{
    let chunks = replicas.div_ceil(CHUNK);
    let partial: Vec<Vec<u64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut h = vec![0u64; bins];
            for r in c * CHUNK..((c + 1) * CHUNK).min(replicas) {
                h[f(r)] += 1;
            }
            h
        })
        .collect();
    let mut out = vec![0u64; bins];
    for h in partial {
        for (o, v) in out.iter_mut().zip(h) {
            *o += v;
        }
    }
    out
}

/// Ordered map over replicas.
pub fn replica_map<T: Send, F>(replicas: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T + Sync,
{
    (0..replicas).into_par_iter().map(&f).collect()
}
