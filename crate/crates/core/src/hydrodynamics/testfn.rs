//! Test functions on the macroscopic torus.
//!
//! Compact bumps are products over coordinates of a 1-D profile of the
//! offset `r` from `center` (minimal image), vanishing for `|r| >= width`:
//!
//! - cosine: `(1 + cos(pi r / R)) / 2`, integral `R` per axis;
//! - polynomial: `(1 - (r / R)^2)^4`, integral `256 R / 315` per axis.
//!
//! The Gaussian bump `exp(-|r|^2 / (2 w^2))` is summed over all periodic
//! images, so its integral over one period is exactly `(2 pi w^2)^(d/2)`.
//! `Constant` is the periodic constant `amplitude`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, SepError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestFunctionKind {
    GaussianBump,
    CosineBump,
    PolynomialBump,
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub kind: TestFunctionKind,
    pub center: Vec<f64>,
    pub width: f64,
    pub amplitude: f64,
}

/// Image mass below which periodic sums are truncated.
pub const IMAGE_TOL: f64 = 1e-12;

#[inline]
pub(crate) fn wrap(r: f64, period: f64) -> f64 {
    r - period * (r / period).round()
}

/// `sum_m exp(-(r + m P)^2 / (2 s2))` over all integers `m`.
pub(crate) fn periodic_gauss_1d(r: f64, s2: f64, period: f64) -> f64 {
    let r = wrap(r, period);
    let reach = (2.0 * s2 * (1.0 / IMAGE_TOL).ln()).sqrt();
    let m_max = (reach / period).ceil() as i64 + 1;
    let mut s = 0.0;
    for m in -m_max..=m_max {
        let x = r + m as f64 * period;
        s += (-x * x / (2.0 * s2)).exp();
    }
    s
}

impl TestFunction {
    pub fn gaussian_bump(center: Vec<f64>, width: f64, amplitude: f64) -> Self {
        Self::make(TestFunctionKind::GaussianBump, center, width, amplitude)
    }
    pub fn cosine_bump(center: Vec<f64>, width: f64, amplitude: f64) -> Self {
        Self::make(TestFunctionKind::CosineBump, center, width, amplitude)
    }
    pub fn polynomial_bump(center: Vec<f64>, width: f64, amplitude: f64) -> Self {
        Self::make(TestFunctionKind::PolynomialBump, center, width, amplitude)
    }
    pub fn constant(dim: usize, amplitude: f64) -> Self {
        Self::make(TestFunctionKind::Constant, vec![0.0; dim], 1.0, amplitude)
    }

    fn make(kind: TestFunctionKind, center: Vec<f64>, width: f64, amplitude: f64) -> Self {
        TestFunction {
            kind,
            center,
            width,
            amplitude,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.center.is_empty() {
            return Err(invalid("center", "needs at least one coordinate"));
        }
        if !(self.width > 0.0 && self.width.is_finite()) {
            return Err(invalid("width", "must be positive and finite"));
        }
        if !self.amplitude.is_finite() || self.center.iter().any(|c| !c.is_finite()) {
            return Err(invalid("test function", "parameters must be finite"));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Compact support must fit in one period along every axis.
    pub fn check_fits(&self, periods: &[f64]) -> Result<()> {
        self.validate()?;
        if periods.len() != self.dim() {
            return Err(SepError::InvalidDims(format!(
                "test function in d={} evaluated on a {}-dimensional torus",
                self.dim(),
                periods.len()
            )));
        }
        if matches!(
            self.kind,
            TestFunctionKind::CosineBump | TestFunctionKind::PolynomialBump
        ) {
            if let Some(&p) = periods.iter().find(|&&p| 2.0 * self.width > p + 1e-12) {
                return Err(SepError::SupportOverflow {
                    radius: self.width,
                    period: p,
                });
            }
        }
        Ok(())
    }

    fn profile_1d(&self, r: f64, period: f64) -> f64 {
        let w = self.width;
        match self.kind {
            TestFunctionKind::CosineBump => {
                let r = wrap(r, period);
                if r.abs() >= w {
                    0.0
                } else {
                    0.5 * (1.0 + (std::f64::consts::PI * r / w).cos())
                }
            }
            TestFunctionKind::PolynomialBump => {
                let r = wrap(r, period);
                if r.abs() >= w {
                    0.0
                } else {
                    let s = 1.0 - (r / w).powi(2);
                    s.powi(4)
                }
            }
            TestFunctionKind::GaussianBump => periodic_gauss_1d(r, w * w, period),
            TestFunctionKind::Constant => 1.0,
        }
    }

    /// Value at `u` on the torus with the given periods. Callers are
    /// expected to have run [`TestFunction::check_fits`].
    pub fn eval_periodic(&self, u: &[f64], periods: &[f64]) -> f64 {
        let mut v = self.amplitude;
        for k in 0..self.dim() {
            v *= self.profile_1d(u[k] - self.center[k], periods[k]);
            if v == 0.0 {
                break;
            }
        }
        v
    }

    /// Value on the unit torus.
    pub fn eval(&self, u: &[f64]) -> f64 {
        self.eval_periodic(u, &vec![1.0; self.dim()])
    }

    fn integral_1d(&self, period: f64) -> f64 {
        let w = self.width;
        match self.kind {
            TestFunctionKind::CosineBump => w,
            TestFunctionKind::PolynomialBump => 256.0 * w / 315.0,
            TestFunctionKind::GaussianBump => (2.0 * std::f64::consts::PI).sqrt() * w,
            TestFunctionKind::Constant => period,
        }
    }

    /// Integral over one period of the torus with the given periods.
    pub fn integral_on(&self, periods: &[f64]) -> f64 {
        self.amplitude * periods.iter().map(|&p| self.integral_1d(p)).product::<f64>()
    }

    /// Integral over the unit torus.
    pub fn integral(&self) -> f64 {
        self.integral_on(&vec![1.0; self.dim()])
    }

    /// Integral of `|G|` over the unit torus.
    pub fn abs_integral(&self) -> f64 {
        self.integral().abs()
    }

    /// Supremum of `|G|` on the unit torus.
    pub fn sup_norm(&self) -> f64 {
        let peak = match self.kind {
            TestFunctionKind::GaussianBump => {
                periodic_gauss_1d(0.0, self.width * self.width, 1.0).powi(self.dim() as i32)
            }
            _ => 1.0,
        };
        self.amplitude.abs() * peak
    }

    /// Support box `[lo, hi]` per axis for quadrature (a full period when
    /// the function is not compactly supported).
    pub fn support_box(&self, periods: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let half: Vec<f64> = match self.kind {
            TestFunctionKind::CosineBump | TestFunctionKind::PolynomialBump => {
                periods.iter().map(|&p| self.width.min(p / 2.0)).collect()
            }
            _ => periods.iter().map(|&p| p / 2.0).collect(),
        };
        let lo = self.center.iter().zip(&half).map(|(c, h)| c - h).collect();
        let hi = self.center.iter().zip(&half).map(|(c, h)| c + h).collect();
        (lo, hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn riemann(g: &TestFunction, m: usize) -> f64 {
        (0..m).map(|i| g.eval(&[i as f64 / m as f64])).sum::<f64>() / m as f64
    }

    #[test]
    fn closed_form_integrals_match_riemann_sums() {
        let cases = [
            TestFunction::cosine_bump(vec![0.3], 0.2, 1.7),
            TestFunction::polynomial_bump(vec![0.9], 0.35, -0.4),
            TestFunction::gaussian_bump(vec![0.5], 0.3, 2.0),
            TestFunction::constant(1, 0.25),
        ];
        for g in &cases {
            // periodic trapezoid converges fast for these smooth periodic integrands
            assert!((riemann(g, 20_000) - g.integral()).abs() < 1e-10, "{g:?}");
        }
    }

    #[test]
    fn product_structure_in_2d() {
        let g = TestFunction::cosine_bump(vec![0.5, 0.25], 0.2, 1.0);
        assert!((g.integral() - 0.04).abs() < 1e-15);
        assert_eq!(g.eval(&[0.5, 0.25]), 1.0);
        assert_eq!(g.eval(&[0.5, 0.5]), 0.0);
        assert_eq!(g.eval(&[0.5, 0.25 + 1.0]), 1.0);
    }

    #[test]
    fn wide_gaussian_sums_images() {
        let g = TestFunction::gaussian_bump(vec![0.0], 1.0, 1.0);
        // with w = 1 the periodisation of a unit-period Gaussian is nearly flat
        let a = g.eval(&[0.0]);
        let b = g.eval(&[0.5]);
        assert!((a - b).abs() < 1e-6);
        assert!((a - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-6);
    }

    #[test]
    fn support_overflow_detected() {
        let g = TestFunction::polynomial_bump(vec![0.5], 0.6, 1.0);
        assert!(matches!(g.check_fits(&[1.0]), Err(SepError::SupportOverflow { .. })));
        assert!(TestFunction::cosine_bump(vec![0.5], 0.5, 1.0)
            .check_fits(&[1.0])
            .is_ok());
    }
}
