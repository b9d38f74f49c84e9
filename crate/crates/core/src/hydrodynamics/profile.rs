//! Macroscopic density profiles on the unit torus and their heat flow.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use super::heat::cholesky;
use crate::error::{invalid, Result, SepError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MacroscopicProfile {
    Constant {
        rho: f64,
    },
    /// `mean + amplitude * sin(2 pi mode . u)`.
    Sinusoid {
        mean: f64,
        amplitude: f64,
        mode: Vec<i32>,
    },
    /// One-dimensional: `high` on `[start, end)`, `low` elsewhere.
    Step {
        low: f64,
        high: f64,
        start: f64,
        end: f64,
    },
}

impl MacroscopicProfile {
    /// `(1 + sin 2 pi u) / 2` in one dimension.
    pub fn half_sine() -> Self {
        MacroscopicProfile::Sinusoid {
            mean: 0.5,
            amplitude: 0.5,
            mode: vec![1],
        }
    }

    pub fn dim(&self) -> Option<usize> {
        match self {
            MacroscopicProfile::Constant { .. } => None,
            MacroscopicProfile::Sinusoid { mode, .. } => Some(mode.len()),
            MacroscopicProfile::Step { .. } => Some(1),
        }
    }

    pub fn eval(&self, u: &[f64]) -> f64 {
        match self {
            MacroscopicProfile::Constant { rho } => *rho,
            MacroscopicProfile::Sinusoid { mean, amplitude, mode } => {
                let phase: f64 = mode.iter().zip(u).map(|(&k, &x)| k as f64 * x).sum();
                mean + amplitude * (2.0 * std::f64::consts::PI * phase).sin()
            }
            MacroscopicProfile::Step { low, high, start, end } => {
                let x = u[0].rem_euclid(1.0);
                if x >= *start && x < *end {
                    *high
                } else {
                    *low
                }
            }
        }
    }

    /// Range check on a dense grid (exact for the sinusoid extremes).
    pub fn validate(&self, dim: usize) -> Result<()> {
        if let Some(d) = self.dim() {
            if d != dim {
                return Err(SepError::InvalidDims(format!("profile in d={d} used in d={dim}")));
            }
        }
        let in_range = |v: f64| (0.0..=1.0).contains(&v);
        let ok = match self {
            MacroscopicProfile::Constant { rho } => in_range(*rho),
            MacroscopicProfile::Sinusoid { mean, amplitude, .. } => {
                in_range(mean + amplitude.abs()) && in_range(mean - amplitude.abs())
            }
            MacroscopicProfile::Step { low, high, start, end } => {
                in_range(*low) && in_range(*high) && 0.0 <= *start && start <= end && *end <= 1.0
            }
        };
        let grid_ok = (0..=4096).all(|i| {
            let x = i as f64 / 4096.0;
            in_range(self.eval(&vec![x; dim]))
        });
        if ok && grid_ok {
            Ok(())
        } else {
            Err(invalid("rho_bar", "profile leaves [0, 1]"))
        }
    }
}

/// `rho_t = S^Sigma_t rho_bar` on the unit torus.
#[derive(Debug, Clone)]
pub struct HeatSolution {
    profile: MacroscopicProfile,
    sigma: Vec<Vec<f64>>,
    t: f64,
}

pub fn heat_solution(sigma: &[Vec<f64>], profile: &MacroscopicProfile, t: f64) -> Result<HeatSolution> {
    cholesky(sigma)?;
    if !(t >= 0.0 && t.is_finite()) {
        return Err(invalid("t", "must be finite and non-negative"));
    }
    profile.validate(sigma.len())?;
    Ok(HeatSolution {
        profile: profile.clone(),
        sigma: sigma.to_vec(),
        t,
    })
}

impl HeatSolution {
    pub fn eval(&self, u: &[f64]) -> f64 {
        match &self.profile {
            MacroscopicProfile::Constant { rho } => *rho,
            MacroscopicProfile::Sinusoid { mean, amplitude, mode } => {
                let d = mode.len();
                let mut q = 0.0;
                for i in 0..d {
                    for j in 0..d {
                        q += mode[i] as f64 * self.sigma[i][j] * mode[j] as f64;
                    }
                }
                let decay = (-2.0 * std::f64::consts::PI.powi(2) * q * self.t).exp();
                let phase: f64 = mode.iter().zip(u).map(|(&k, &x)| k as f64 * x).sum();
                mean + amplitude * decay * (2.0 * std::f64::consts::PI * phase).sin()
            }
            MacroscopicProfile::Step { low, high, start, end } => {
                if self.t == 0.0 {
                    return self.profile.eval(u);
                }
                let s = (self.sigma[0][0] * self.t).sqrt();
                let phi = |z: f64| 0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2));
                let x = u[0].rem_euclid(1.0);
                let reach = (8.0 * s).ceil() as i64 + 1;
                let mass: f64 = (-reach..=reach)
                    .map(|m| {
                        let y = x + m as f64;
                        phi((y - start) / s) - phi((y - end) / s)
                    })
                    .sum();
                low + (high - low) * mass
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hydrodynamics::heat::crank_nicolson_1d;

    #[test]
    fn identity_at_zero_and_constants_stationary() {
        let sigma = vec![vec![2.37]];
        let p = MacroscopicProfile::half_sine();
        let h0 = heat_solution(&sigma, &p, 0.0).unwrap();
        for x in [0.0, 0.1, 0.77] {
            assert_eq!(h0.eval(&[x]), p.eval(&[x]));
        }
        let c = MacroscopicProfile::Constant { rho: 0.3 };
        assert_eq!(heat_solution(&sigma, &c, 5.0).unwrap().eval(&[0.2]), 0.3);
    }

    #[test]
    fn sine_mode_decay() {
        let sigma = vec![vec![2.0]];
        let h = heat_solution(&sigma, &MacroscopicProfile::half_sine(), 0.03).unwrap();
        let x: f64 = 0.2;
        let expect = 0.5
            * (1.0
                + (-2.0 * std::f64::consts::PI.powi(2) * 2.0 * 0.03f64).exp() * (2.0 * std::f64::consts::PI * x).sin());
        assert!((h.eval(&[x]) - expect).abs() < 1e-15);
    }

    #[test]
    fn step_closed_form_matches_crank_nicolson() {
        let p = MacroscopicProfile::Step {
            low: 0.1,
            high: 0.9,
            start: 0.25,
            end: 0.6,
        };
        let sigma = 2.0;
        let t = 0.005;
        let h = heat_solution(&[vec![sigma]], &p, t).unwrap();
        let m = 2048;
        let cn = crank_nicolson_1d(|x| p.eval(&[x]), sigma, t, m, 2000).unwrap();
        let worst = (0..m)
            .map(|i| (cn[i] - h.eval(&[(i as f64 + 0.5) / m as f64])).abs())
            .fold(0.0, f64::max);
        assert!(worst < 2e-3, "worst {worst}");
    }

    #[test]
    fn range_validation() {
        assert!(MacroscopicProfile::Constant { rho: 1.2 }.validate(1).is_err());
        let bad = MacroscopicProfile::Sinusoid {
            mean: 0.6,
            amplitude: 0.5,
            mode: vec![1],
        };
        assert!(bad.validate(1).is_err());
        assert!(MacroscopicProfile::half_sine().validate(1).is_ok());
        assert!(MacroscopicProfile::half_sine().validate(2).is_err());
    }
}
