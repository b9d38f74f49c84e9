//! Self-duality of SEP(alpha) evaluated as exact finite sums.

use serde::{Deserialize, Serialize};

use super::config::{apply_move, move_rate, ParticleConfig};
use crate::environment::Environment;
use crate::error::{Result, SepError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstCase {
    pub env_hash: String,
    pub config_hash: String,
    /// Site (single dual particle) or dual configuration as JSON.
    pub dual: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualityReport {
    pub max_abs_residual: f64,
    pub cases: usize,
    pub worst_case: Option<WorstCase>,
}

impl DualityReport {
    pub fn empty() -> Self {
        DualityReport {
            max_abs_residual: 0.0,
            cases: 0,
            worst_case: None,
        }
    }

    pub fn merge(mut self, other: DualityReport) -> Self {
        self.cases += other.cases;
        if other.cases > 0 && (self.worst_case.is_none() || other.max_abs_residual > self.max_abs_residual) {
            self.max_abs_residual = other.max_abs_residual;
            self.worst_case = other.worst_case;
        }
        self
    }
}

/// `D(x, eta) = eta(x) / alpha_x`.
pub fn single_duality_function(env: &Environment, x: usize, eta: &ParticleConfig) -> f64 {
    eta.at(x) as f64 / env.at(x) as f64
}

/// `D(xi, eta) = prod_x [eta(x)! / (eta(x) - xi(x))!] [(alpha_x - xi(x))! / alpha_x!]`
/// when `xi <= eta`, else 0.
pub fn duality_function(env: &Environment, xi: &ParticleConfig, eta: &ParticleConfig) -> f64 {
    let mut d = 1.0;
    for x in 0..env.size() {
        let (k, e, a) = (xi.at(x), eta.at(x), env.at(x));
        if k > e {
            return 0.0;
        }
        for m in 0..k {
            d *= (e - m) as f64 / (a - m) as f64;
        }
    }
    d
}

/// Compares `A^alpha D(., eta)(x)` with `L^alpha D(x, .)(eta)`.
pub fn duality_check(env: &Environment, cfg: &ParticleConfig, x: usize) -> Result<DualityReport> {
    cfg.validate(env)?;
    let t = env.torus();
    t.check_site(x)?;
    let ratio = |y: usize| single_duality_function(env, y, cfg);
    let lhs: f64 = t
        .neighbours(x)
        .iter()
        .map(|&y| env.at(y) as f64 * (ratio(y) - ratio(x)))
        .sum();
    let base = single_duality_function(env, x, cfg);
    let mut rhs = 0.0;
    for &y in t.neighbours(x) {
        for (u, v) in [(x, y), (y, x)] {
            let rate = move_rate(env, cfg.eta(), u, v);
            if rate > 0 {
                let moved = apply_move(env, cfg, u, v)?;
                rhs += rate as f64 * (single_duality_function(env, x, &moved) - base);
            }
        }
    }
    let residual = (lhs - rhs).abs();
    Ok(DualityReport {
        max_abs_residual: residual,
        cases: 1,
        worst_case: Some(WorstCase {
            env_hash: env.content_hash(),
            config_hash: cfg.content_hash(),
            dual: x.to_string(),
        }),
    })
}

/// Largest number of dual particles accepted by [`multi_duality_check`].
pub const MAX_DUAL_PARTICLES: u64 = 4;

/// Compares `L D(., eta)(xi)` with `L D(xi, .)(eta)`, both by enumerating
/// every directed bond of the torus.
pub fn multi_duality_check(env: &Environment, xi: &ParticleConfig, eta: &ParticleConfig) -> Result<DualityReport> {
    xi.validate(env)?;
    eta.validate(env)?;
    if xi.total() > MAX_DUAL_PARTICLES {
        return Err(SepError::InvalidConfig(format!(
            "{} dual particles exceed the enumeration limit {MAX_DUAL_PARTICLES}",
            xi.total()
        )));
    }
    let t = env.torus();
    let base = duality_function(env, xi, eta);
    let mut on_dual = 0.0;
    let mut on_eta = 0.0;
    for u in 0..t.size() {
        for &v in t.neighbours(u) {
            let r = move_rate(env, xi.eta(), u, v);
            if r > 0 {
                let moved = apply_move(env, xi, u, v)?;
                on_dual += r as f64 * (duality_function(env, &moved, eta) - base);
            }
            let r = move_rate(env, eta.eta(), u, v);
            if r > 0 {
                let moved = apply_move(env, eta, u, v)?;
                on_eta += r as f64 * (duality_function(env, xi, &moved) - base);
            }
        }
    }
    Ok(DualityReport {
        max_abs_residual: (on_dual - on_eta).abs(),
        cases: 1,
        worst_case: Some(WorstCase {
            env_hash: env.content_hash(),
            config_hash: eta.content_hash(),
            dual: xi.to_json()?,
        }),
    })
}
