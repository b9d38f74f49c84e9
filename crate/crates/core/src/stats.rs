//! Small statistical helpers shared by the checks.
//!
//! All reductions take their inputs in a fixed order and use Neumaier
//! summation, so results do not depend on how work was scheduled.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Running Neumaier-compensated sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
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

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut acc = Neumaier::default();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    compensated_sum(values.iter().copied()) / values.len() as f64
}

/// Unbiased sample variance.
pub fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(values);
    compensated_sum(values.iter().map(|v| (v - m) * (v - m))) / (n - 1) as f64
}

/// Sample mean and its standard error.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    (mean(values), (sample_variance(values) / n).sqrt())
}

/// `(estimate - target) / stderr`, with the degenerate zero-stderr case
/// mapped to 0 (exact agreement) or infinity.
pub fn standardized(estimate: f64, target: f64, stderr: f64) -> f64 {
    let diff = estimate - target;
    if stderr > 0.0 {
        diff / stderr
    } else if diff.abs() <= 1e-12 * (1.0 + target.abs()) {
        0.0
    } else {
        f64::INFINITY * diff.signum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares `y = intercept + slope * x`.
pub fn ols(x: &[f64], y: &[f64]) -> LinearFit {
    assert_eq!(x.len(), y.len());
    let mx = mean(x);
    let my = mean(y);
    let sxy = compensated_sum(x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)));
    let sxx = compensated_sum(x.iter().map(|a| (a - mx) * (a - mx)));
    let syy = compensated_sum(y.iter().map(|b| (b - my) * (b - my)));
    let slope = sxy / sxx;
    let r_squared = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    LinearFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Two-sample chi-square test of homogeneity for histograms over the same
/// bins. Bins are merged in order until every merged bin has a pooled
/// expected count of at least 5 in each sample.
pub fn chi_square_two_sample(a: &[u64], b: &[u64]) -> ChiSquareResult {
    assert_eq!(a.len(), b.len());
    let na: u64 = a.iter().sum();
    let nb: u64 = b.iter().sum();
    let total = (na + nb) as f64;
    let fa = na as f64 / total;
    let fb = nb as f64 / total;

    let mut merged: Vec<(f64, f64)> = Vec::new();
    let (mut ca, mut cb) = (0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        ca += x as f64;
        cb += y as f64;
        let pooled = ca + cb;
        if pooled * fa.min(fb) >= 5.0 {
            merged.push((ca, cb));
            ca = 0.0;
            cb = 0.0;
        }
    }
    if ca + cb > 0.0 {
        match merged.last_mut() {
            Some(last) => {
                last.0 += ca;
                last.1 += cb;
            }
            None => merged.push((ca, cb)),
        }
    }
    if merged.len() < 2 {
        return ChiSquareResult {
            statistic: 0.0,
            dof: 0,
            p_value: 1.0,
        };
    }
    let statistic = compensated_sum(merged.iter().map(|&(x, y)| {
        let pooled = x + y;
        let ea = pooled * fa;
        let eb = pooled * fb;
        (x - ea).powi(2) / ea + (y - eb).powi(2) / eb
    }));
    let dof = merged.len() - 1;
    let dist = ChiSquared::new(dof as f64).expect("positive dof");
    ChiSquareResult {
        statistic,
        dof,
        p_value: dist.sf(statistic),
    }
}

/// Split `values` into `batches` contiguous batches and return the batch
/// means (trailing remainder folded into the last batch).
pub fn batch_means(values: &[f64], batches: usize) -> Vec<f64> {
    let n = values.len();
    let batches = batches.min(n).max(1);
    let size = n / batches;
    (0..batches)
        .map(|b| {
            let lo = b * size;
            let hi = if b + 1 == batches { n } else { lo + size };
            mean(&values[lo..hi])
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let v = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(v), 2.0);
    }

    #[test]
    fn ols_exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 + 0.5 * v).collect();
        let fit = ols(&x, &y);
        assert!((fit.slope - 0.5).abs() < 1e-14);
        assert!((fit.intercept - 2.0).abs() < 1e-14);
        assert!((fit.r_squared - 1.0).abs() < 1e-14);
    }

    #[test]
    fn chi_square_identical_histograms() {
        let a = [100, 200, 300, 50];
        let r = chi_square_two_sample(&a, &a);
        assert_eq!(r.statistic, 0.0);
        assert!((r.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn chi_square_detects_shift() {
        let a = [1000, 1000, 1000, 1000];
        let b = [1300, 1000, 1000, 700];
        assert!(chi_square_two_sample(&a, &b).p_value < 1e-6);
    }

    #[test]
    fn chi_square_merges_sparse_bins() {
        let a = [500, 1, 0, 2, 497];
        let b = [498, 0, 3, 1, 498];
        let r = chi_square_two_sample(&a, &b);
        assert!(r.dof <= 2);
        assert!(r.p_value > 0.01);
    }

    #[test]
    fn standardized_degenerate() {
        assert_eq!(standardized(1.0, 1.0, 0.0), 0.0);
        assert!(standardized(1.1, 1.0, 0.0).is_infinite());
        assert_eq!(standardized(1.5, 1.0, 0.25), 2.0);
    }
}
