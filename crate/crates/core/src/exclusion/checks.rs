//! Statistical checks of SEP(alpha): reversibility, the mean of the mild
//! solution, martingale covariations and ladder/direct agreement.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, Discrete};

use super::config::{move_rate, ParticleConfig};
use super::direct::DirectSep;
use super::ladder::{lift, LadderSep};
use crate::environment::Environment;
use crate::error::{invalid, Result};
use crate::parallel::{replica_histogram, replica_moments};
use crate::report::CheckReport;
use crate::rng::{rng_from_seed, seed_schedule, TaskKind};
use crate::semigroup::Uniformizer;
use crate::stats::standardized;
use crate::walk::{GeneratorMatrix, WalkKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReversibilityReport {
    pub cases: usize,
    pub max_relative_residual: f64,
    pub frozen_cases: usize,
}

impl ReversibilityReport {
    pub fn check_report(&self) -> CheckReport {
        CheckReport::new("binomial_reversibility", self.cases, self.max_relative_residual, 1e-10)
    }
}

/// Detailed balance of `Binomial(alpha_x, p)` products on random
/// `(configuration, directed bond)` pairs. Only the two sites of the bond
/// enter the mass ratio.
pub fn reversibility_check(env: &Environment, p: f64, samples: usize, seed: u64) -> Result<ReversibilityReport> {
    if !(p > 0.0 && p < 1.0) {
        return Err(invalid("p", "must lie in (0, 1)"));
    }
    let t = env.torus();
    let laws: Vec<Binomial> = (0..=env.c_max())
        .map(|a| Binomial::new(p, a as u64).expect("valid binomial"))
        .collect();
    let mass = |x: usize, k: u32| laws[env.at(x) as usize].pmf(k as u64);
    let mut rng = rng_from_seed(seed);
    let mut worst: f64 = 0.0;
    let mut frozen = 0;
    for _ in 0..samples {
        let cfg = ParticleConfig::uniform_random(env, &mut rng);
        let x = rng.random_range(0..t.size());
        let y = t.neighbour(x, rng.random_range(0..t.degree()));
        let forward = move_rate(env, cfg.eta(), x, y) as f64;
        let (ex, ey) = (cfg.at(x), cfg.at(y));
        let (fx, fy) = if forward > 0.0 { (ex - 1, ey + 1) } else { (ex, ey) };
        let backward = if forward > 0.0 {
            fy as f64 * (env.at(x) - fx) as f64
        } else {
            0.0
        };
        let lhs = mass(x, ex) * mass(y, ey) * forward;
        let rhs = mass(x, fx) * mass(y, fy) * backward;
        let scale = lhs.abs().max(rhs.abs());
        if scale == 0.0 {
            frozen += 1;
            continue;
        }
        worst = worst.max((lhs - rhs).abs() / scale);
    }
    Ok(ReversibilityReport {
        cases: samples,
        max_relative_residual: worst,
        frozen_cases: frozen,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeDeviation {
    pub t: f64,
    pub max_standardized: f64,
    pub worst_site: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanDensityReport {
    pub replicas: usize,
    pub per_time: Vec<TimeDeviation>,
    pub max_standardized: f64,
}

impl MeanDensityReport {
    pub fn check_report(&self) -> CheckReport {
        CheckReport::new(
            "mild_solution_mean",
            self.replicas * self.per_time.len(),
            self.max_standardized,
            4.0,
        )
    }
}

fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() {
        return Err(invalid("t_grid", "must not be empty"));
    }
    let mut prev = 0.0;
    for &t in t_grid {
        if !(t >= prev && t.is_finite()) {
            return Err(invalid("t_grid", "must be finite, non-negative and increasing"));
        }
        prev = t;
    }
    Ok(())
}

/// Monte Carlo `E[eta_t(x) / alpha_x]` against `S_t(eta_0 / alpha)(x)`.
pub fn mean_density_evolution_check(
    env: &Environment,
    cfg0: &ParticleConfig,
    t_grid: &[f64],
    replicas: usize,
    seed: u64,
) -> Result<MeanDensityReport> {
    cfg0.validate(env)?;
    check_grid(t_grid)?;
    let n = env.size();
    let alpha: Vec<f64> = env.alpha().iter().map(|&a| a as f64).collect();
    let moments = replica_moments(replicas, n * t_grid.len(), |r, out| {
        let mut rng = rng_from_seed(seed_schedule(seed, TaskKind::Sep, 0, r as u64));
        let mut sep = DirectSep::new(env, cfg0.clone()).expect("validated");
        let mut now = 0.0;
        for (k, &t) in t_grid.iter().enumerate() {
            sep.advance(t - now, &mut rng, |_, _, _| {});
            now = t;
            for x in 0..n {
                out[k * n + x] = sep.config().at(x) as f64 / alpha[x];
            }
        }
    });
    let u = Uniformizer::new(&GeneratorMatrix::new(env, WalkKind::AlphaWalk));
    let f0 = cfg0.ratios(env);
    let mut per_time = Vec::with_capacity(t_grid.len());
    for (k, &t) in t_grid.iter().enumerate() {
        let exact = u.apply(&f0, t, 1e-12)?;
        let mut worst = (0.0, 0);
        for x in 0..n {
            let i = k * n + x;
            // No replica moved away from a common value: fall back on the
            // null bound Var(eta / alpha) <= m (1 - m).
            let se = match moments.stderr(i) {
                s if s > 0.0 => s,
                _ => (exact[x] * (1.0 - exact[x])).max(0.0).sqrt() / (replicas as f64).sqrt(),
            };
            let z = standardized(moments.mean(i), exact[x], se).abs();
            if z > worst.0 {
                worst = (z, x);
            }
        }
        per_time.push(TimeDeviation {
            t,
            max_standardized: worst.0,
            worst_site: worst.1,
        });
    }
    let max_standardized = per_time.iter().map(|p| p.max_standardized).fold(0.0, f64::max);
    Ok(MeanDensityReport {
        replicas,
        per_time,
        max_standardized,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCovariation {
    pub x: usize,
    pub y: usize,
    pub adjacent: bool,
    /// Replica mean of `M_t(x) M_t(y)`.
    pub empirical: f64,
    /// Replica mean of the compensator derived from the generator.
    pub predicted: f64,
    /// `(empirical - predicted) / stderr`, computed on per-replica differences.
    pub standardized: f64,
    /// Replica mean of the single-site display
    /// `-1{|x-y|=1} int alpha_x alpha_y (eta(x)/alpha_x - eta(y)/alpha_y)^2`.
    pub displayed: f64,
    pub displayed_standardized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariationReport {
    pub t: f64,
    pub replicas: usize,
    pub pairs: Vec<PairCovariation>,
    /// Largest `|mean M_t(x)| / stderr` over the sites involved.
    pub max_mean_standardized: f64,
    pub max_standardized: f64,
}

impl CovariationReport {
    pub fn check_report(&self) -> CheckReport {
        CheckReport::new(
            "martingale_covariation",
            self.pairs.len(),
            self.max_standardized.max(self.max_mean_standardized),
            4.0,
        )
    }
}

/// Jump-rate weight of the pair `(x, y)` in the covariation density.
/// Off-diagonal: `-(m_xy / (alpha_x alpha_y)) [eta_x (alpha_y - eta_y) + eta_y (alpha_x - eta_x)]`
/// with `m_xy` the number of bonds joining them; diagonal:
/// `(1 / alpha_x^2) sum_{y ~ x} [eta_x (alpha_y - eta_y) + eta_y (alpha_x - eta_x)]`.
fn covariation_density(env: &Environment, eta: &[u32], x: usize, y: usize) -> f64 {
    let t = env.torus();
    let flux = |u: usize, v: usize| (move_rate(env, eta, u, v) + move_rate(env, eta, v, u)) as f64;
    if x == y {
        let a = env.at(x) as f64;
        t.neighbours(x).iter().map(|&v| flux(x, v)).sum::<f64>() / (a * a)
    } else {
        let m = t.neighbours(x).iter().filter(|&&v| v == y).count() as f64;
        -m * flux(x, y) / (env.at(x) as f64 * env.at(y) as f64)
    }
}

fn displayed_density(env: &Environment, eta: &[u32], x: usize, y: usize) -> f64 {
    let t = env.torus();
    let pair = |u: usize, v: usize| {
        let (au, av) = (env.at(u) as f64, env.at(v) as f64);
        let d = eta[u] as f64 / au - eta[v] as f64 / av;
        -au * av * d * d
    };
    if x == y {
        -t.neighbours(x).iter().map(|&v| pair(x, v)).sum::<f64>()
    } else {
        let m = t.neighbours(x).iter().filter(|&&v| v == y).count() as f64;
        m * pair(x, y)
    }
}

/// Reconstructs `M_t(x) = eta_t(x)/alpha_x - eta_0(x)/alpha_x - int A(eta_s/alpha)(x) ds`
/// along direct simulations, with all time integrals exact between events,
/// and tests `E[M_t(x) M_t(y) - <M(x), M(y)>_t] = 0` for every pair.
pub fn martingale_covariation_check(
    env: &Environment,
    cfg0: &ParticleConfig,
    pairs: &[(usize, usize)],
    t: f64,
    replicas: usize,
    seed: u64,
) -> Result<CovariationReport> {
    cfg0.validate(env)?;
    if !(t > 0.0 && t.is_finite()) {
        return Err(invalid("t", "must be positive and finite"));
    }
    let torus = env.torus();
    let mut sites: Vec<usize> = Vec::new();
    for &(x, y) in pairs {
        torus.check_site(x)?;
        torus.check_site(y)?;
        for s in [x, y] {
            if !sites.contains(&s) {
                sites.push(s);
            }
        }
    }
    let slot = |s: usize| sites.iter().position(|&v| v == s).unwrap();
    let pair_slots: Vec<(usize, usize)> = pairs.iter().map(|&(x, y)| (slot(x), slot(y))).collect();
    let ns = sites.len();
    let np = pairs.len();
    // per replica: M per site, then per pair [Z, M_x M_y, C, M_x M_y - D, D]
    let width = ns + 5 * np;
    let moments = replica_moments(replicas, width, |r, out| {
        let mut rng = rng_from_seed(seed_schedule(seed, TaskKind::Sep, 1, r as u64));
        let mut sep = DirectSep::new(env, cfg0.clone()).expect("validated");
        let mut drift_int = vec![0.0; ns];
        let mut comp = vec![0.0; np];
        let mut disp = vec![0.0; np];
        let mut now = 0.0;
        let accumulate = |eta: &[u32], dt: f64, drift_int: &mut [f64], comp: &mut [f64], disp: &mut [f64]| {
            for (k, &s) in sites.iter().enumerate() {
                let a = env.at(s) as f64;
                let drift: f64 = torus
                    .neighbours(s)
                    .iter()
                    .map(|&v| eta[v] as f64 - env.at(v) as f64 * eta[s] as f64 / a)
                    .sum();
                drift_int[k] += drift * dt;
            }
            for (p, &(x, y)) in pairs.iter().enumerate() {
                comp[p] += covariation_density(env, eta, x, y) * dt;
                disp[p] += displayed_density(env, eta, x, y) * dt;
            }
        };
        loop {
            match sep.propose(&mut rng) {
                Some((dt, x, y)) if now + dt <= t => {
                    accumulate(sep.config().eta(), dt, &mut drift_int, &mut comp, &mut disp);
                    now += dt;
                    sep.apply(x, y);
                }
                _ => {
                    accumulate(sep.config().eta(), t - now, &mut drift_int, &mut comp, &mut disp);
                    break;
                }
            }
        }
        let eta = sep.config().eta();
        let m: Vec<f64> = sites
            .iter()
            .enumerate()
            .map(|(k, &s)| (eta[s] as f64 - cfg0.at(s) as f64) / env.at(s) as f64 - drift_int[k])
            .collect();
        out[..ns].copy_from_slice(&m);
        for (p, &(i, j)) in pair_slots.iter().enumerate() {
            let prod = m[i] * m[j];
            let o = &mut out[ns + 5 * p..ns + 5 * p + 5];
            o[0] = prod - comp[p];
            o[1] = prod;
            o[2] = comp[p];
            o[3] = prod - disp[p];
            o[4] = disp[p];
        }
    });
    let max_mean_standardized = (0..ns)
        .map(|k| standardized(moments.mean(k), 0.0, moments.stderr(k)).abs())
        .fold(0.0, f64::max);
    let mut out_pairs = Vec::with_capacity(np);
    for (p, &(x, y)) in pairs.iter().enumerate() {
        let b = ns + 5 * p;
        out_pairs.push(PairCovariation {
            x,
            y,
            adjacent: x != y && torus.are_neighbours(x, y),
            empirical: moments.mean(b + 1),
            predicted: moments.mean(b + 2),
            standardized: standardized(moments.mean(b), 0.0, moments.stderr(b)),
            displayed: moments.mean(b + 4),
            displayed_standardized: standardized(moments.mean(b + 3), 0.0, moments.stderr(b + 3)),
        });
    }
    let max_standardized = out_pairs.iter().map(|p| p.standardized.abs()).fold(0.0, f64::max);
    Ok(CovariationReport {
        t,
        replicas,
        pairs: out_pairs,
        max_mean_standardized,
        max_standardized,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalComparison {
    pub t: f64,
    pub replicas: usize,
    pub mean_direct: Vec<f64>,
    pub mean_ladder: Vec<f64>,
    /// Per-site two-sample z scores.
    pub z: Vec<f64>,
    pub max_abs_z: f64,
}

impl MarginalComparison {
    pub fn check_report(&self) -> CheckReport {
        CheckReport::new("ladder_equivalence", self.z.len(), self.max_abs_z, 3.0)
    }
}

/// `E[eta_t(x)]` from the ladder construction and from direct simulation,
/// each over `replicas` independent runs.
pub fn ladder_direct_comparison(
    env: &Environment,
    cfg0: &ParticleConfig,
    t: f64,
    replicas: usize,
    seed: u64,
) -> Result<MarginalComparison> {
    cfg0.validate(env)?;
    if !(t >= 0.0 && t.is_finite()) {
        return Err(invalid("t", "must be finite and non-negative"));
    }
    let n = env.size();
    let ladder0 = lift(env, cfg0)?;
    let direct = replica_moments(replicas, n, |r, out| {
        let mut rng = rng_from_seed(seed_schedule(seed, TaskKind::Sep, 2, r as u64));
        let mut sep = DirectSep::new(env, cfg0.clone()).expect("validated");
        sep.advance(t, &mut rng, |_, _, _| {});
        for (o, &e) in out.iter_mut().zip(sep.config().eta()) {
            *o = e as f64;
        }
    });
    let ladder = replica_moments(replicas, n, |r, out| {
        let mut rng = rng_from_seed(seed_schedule(seed, TaskKind::Ladder, 2, r as u64));
        let mut sep = LadderSep::new(env, ladder0.clone()).expect("validated");
        sep.advance(t, &mut rng, |_, _, _| {});
        for (o, &e) in out.iter_mut().zip(sep.ladder().project().eta()) {
            *o = e as f64;
        }
    });
    let z: Vec<f64> = (0..n)
        .map(|x| {
            let se = (direct.stderr(x).powi(2) + ladder.stderr(x).powi(2)).sqrt();
            standardized(ladder.mean(x), direct.mean(x), se)
        })
        .collect();
    let max_abs_z = z.iter().map(|v| v.abs()).fold(0.0, f64::max);
    Ok(MarginalComparison {
        t,
        replicas,
        mean_direct: (0..n).map(|x| direct.mean(x)).collect(),
        mean_ladder: (0..n).map(|x| ladder.mean(x)).collect(),
        z,
        max_abs_z,
    })
}

/// Where a single particle started at `x0` sits at time `t`, over replicas.
pub fn single_particle_histogram(
    env: &Environment,
    x0: usize,
    t: f64,
    replicas: usize,
    seed: u64,
    ladder: bool,
) -> Result<Vec<u64>> {
    env.torus().check_site(x0)?;
    let mut eta = vec![0u32; env.size()];
    eta[x0] = 1;
    let cfg0 = ParticleConfig::new(env, eta)?;
    let ladder0 = lift(env, &cfg0)?;
    let locate = |cfg: &ParticleConfig| cfg.eta().iter().position(|&e| e == 1).expect("one particle");
    Ok(replica_histogram(replicas, env.size(), |r| {
        if ladder {
            let mut rng = rng_from_seed(seed_schedule(seed, TaskKind::Ladder, 3, r as u64));
            let mut sep = LadderSep::new(env, ladder0.clone()).expect("validated");
            sep.advance(t, &mut rng, |_, _, _| {});
            locate(&sep.ladder().project())
        } else {
            let mut rng = rng_from_seed(seed_schedule(seed, TaskKind::Sep, 3, r as u64));
            let mut sep = DirectSep::new(env, cfg0.clone()).expect("validated");
            sep.advance(t, &mut rng, |_, _, _| {});
            locate(sep.config())
        }
    }))
}
