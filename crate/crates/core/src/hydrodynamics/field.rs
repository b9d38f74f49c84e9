//! Empirical density fields, their deterministic limit, and the
//! hydrodynamic-limit experiment.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::heat::{cholesky, integrate_box};
use super::profile::{heat_solution, MacroscopicProfile};
use super::testfn::TestFunction;
use crate::environment::{EnvLaw, Environment};
use crate::error::{invalid, Result, SepError};
use crate::exclusion::{sample_binomial_with, DirectSep, ParticleConfig};
use crate::lattice::Torus;
use crate::parallel::{replica_map, replica_moments};
use crate::report::CheckReport;
use crate::rng::{rng_from_seed, seed_schedule, TaskKind};
use crate::semigroup::Uniformizer;
use crate::stats::{mean_stderr, Neumaier};
use crate::walk::{GeneratorMatrix, WalkKind};

/// Macroscopic periods `L_k / N` of a torus viewed at scale `N`.
pub fn macroscopic_periods(torus: &Torus, n: usize) -> Vec<f64> {
    torus.dims().iter().map(|&l| l as f64 / n as f64).collect()
}

/// `G(x / N)` at every site.
pub fn lattice_values(g: &TestFunction, torus: &Torus, n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(invalid("N", "scale must be positive"));
    }
    let periods = macroscopic_periods(torus, n);
    g.check_fits(&periods)?;
    let mut u = vec![0.0; torus.dim()];
    Ok((0..torus.size())
        .map(|x| {
            for (k, c) in torus.coords(x).into_iter().enumerate() {
                u[k] = c as f64 / n as f64;
            }
            g.eval_periodic(&u, &periods)
        })
        .collect())
}

fn scale_factor(n: usize, d: usize) -> f64 {
    (n as f64).powi(d as i32)
}

fn weighted_sum(values: &[f64], eta: &[u32]) -> f64 {
    let mut acc = Neumaier::default();
    for (g, &e) in values.iter().zip(eta) {
        if e != 0 {
            acc.add(g * e as f64);
        }
    }
    acc.value()
}

/// `X^N(G) = N^-d sum_x G(x / N) eta(x)`.
pub fn density_field(env: &Environment, cfg: &ParticleConfig, n: usize, g: &TestFunction) -> Result<f64> {
    cfg.validate(env)?;
    let values = lattice_values(g, env.torus(), n)?;
    Ok(weighted_sum(&values, cfg.eta()) / scale_factor(n, env.dim()))
}

/// Initial law of a particle system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialLaw {
    Fixed {
        eta: Vec<u32>,
    },
    /// Product of `Binomial(alpha_x, p)`.
    Binomial {
        p: f64,
    },
    /// Product of `Binomial(alpha_x, rho_bar(x / N))`.
    Profile {
        profile: MacroscopicProfile,
    },
}

impl InitialLaw {
    pub fn sample(&self, env: &Environment, n: usize, seed: u64) -> Result<ParticleConfig> {
        match self {
            InitialLaw::Fixed { eta } => ParticleConfig::new(env, eta.clone()),
            InitialLaw::Binomial { p } => sample_binomial_with(env, |_| *p, seed),
            InitialLaw::Profile { profile } => sample_profile(env, profile, n, seed),
        }
    }

    /// Whether every draw is the same configuration.
    pub fn is_deterministic(&self) -> bool {
        matches!(self, InitialLaw::Fixed { .. })
    }
}

/// Slowly varying product measure `Binomial(alpha_x, rho_bar(x / N))`.
pub fn sample_profile(env: &Environment, profile: &MacroscopicProfile, n: usize, seed: u64) -> Result<ParticleConfig> {
    profile.validate(env.dim())?;
    if n == 0 {
        return Err(invalid("N", "scale must be positive"));
    }
    let t = env.torus();
    sample_binomial_with(
        env,
        |x| {
            let u: Vec<f64> = t.coords(x).iter().map(|&c| c as f64 / n as f64).collect();
            profile.eval(&u)
        },
        seed,
    )
}

/// `pi_t(G) = E[alpha_0] int G(u) rho_t(u) du` over the unit torus.
pub fn limit_field(
    mean_alpha: f64,
    sigma: &[Vec<f64>],
    rho_bar: &MacroscopicProfile,
    g: &TestFunction,
    t: f64,
) -> Result<f64> {
    let d = sigma.len();
    let periods = vec![1.0; d];
    g.check_fits(&periods)?;
    let rho = heat_solution(sigma, rho_bar, t)?;
    let (lo, hi) = g.support_box(&periods);
    let panels = if d == 1 { 64 } else { 24 };
    let integral = integrate_box(|u| g.eval(u) * rho.eval(u), &lo, &hi, panels, 8);
    Ok(mean_alpha * integral)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub n: usize,
    pub samples: usize,
    pub delta: f64,
    pub target: f64,
    pub mean_field: f64,
    pub probability: f64,
}

/// Monte Carlo `P(|X^N_0(G) - E[alpha_0] int G rho_bar| > delta)` under
/// the slowly varying product measure.
pub fn consistency_check(
    env: &Environment,
    rho_bar: &MacroscopicProfile,
    n: usize,
    g: &TestFunction,
    delta: f64,
    samples: usize,
    seed: u64,
) -> Result<ConsistencyReport> {
    rho_bar.validate(env.dim())?;
    let values = lattice_values(g, env.torus(), n)?;
    let scale = scale_factor(n, env.dim());
    let sigma_dummy: Vec<Vec<f64>> = (0..env.dim())
        .map(|i| (0..env.dim()).map(|j| (i == j) as u8 as f64).collect())
        .collect();
    let target = limit_field(env.law().mean(), &sigma_dummy, rho_bar, g, 0.0)?;
    let fields: Vec<f64> = replica_map(samples, |r| {
        let cfg = sample_profile(env, rho_bar, n, seed_schedule(seed, TaskKind::Sampler, 0, r as u64))
            .expect("validated profile");
        weighted_sum(&values, cfg.eta()) / scale
    });
    let exceed = fields.iter().filter(|&&x| (x - target).abs() > delta).count();
    Ok(ConsistencyReport {
        n,
        samples,
        delta,
        target,
        mean_field: crate::stats::mean(&fields),
        probability: exceed as f64 / samples.max(1) as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceBoundReport {
    pub n: usize,
    pub t: f64,
    pub replicas: usize,
    pub mean: f64,
    pub variance: f64,
    pub variance_stderr: f64,
    pub bound: f64,
    pub pass: bool,
}

impl VarianceBoundReport {
    pub fn check_report(&self) -> CheckReport {
        CheckReport {
            name: "variance_bound".into(),
            cases: self.replicas,
            max_residual: self.variance - self.bound,
            pass: self.pass,
        }
    }
}

/// Variance of `X^N_t(G) - X^N_0(S_{t N^2} G)` across replicas against
/// `(1 / 2N^d) N^-d sum_x G(x/N)^2 alpha_x`, with `4 stderr` slack.
pub fn variance_bound_check(
    env: &Environment,
    init: &InitialLaw,
    n: usize,
    g: &TestFunction,
    t: f64,
    replicas: usize,
    seed: u64,
) -> Result<VarianceBoundReport> {
    Ok(variance_bound_scan(env, init, n, g, &[t], replicas, seed)?.remove(0))
}

/// [`variance_bound_check`] at every time of an increasing grid, each
/// replica being a single run recorded along the way.
pub fn variance_bound_scan(
    env: &Environment,
    init: &InitialLaw,
    n: usize,
    g: &TestFunction,
    t_grid: &[f64],
    replicas: usize,
    seed: u64,
) -> Result<Vec<VarianceBoundReport>> {
    if t_grid.is_empty() {
        return Err(invalid("t_grid", "must not be empty"));
    }
    let mut prev = 0.0;
    for &t in t_grid {
        if !(t >= prev && t.is_finite()) {
            return Err(invalid("t", "must be finite, non-negative and increasing"));
        }
        prev = t;
    }
    if replicas < 2 {
        return Err(invalid("replicas", "need at least two"));
    }
    let values = lattice_values(g, env.torus(), n)?;
    let scale = scale_factor(n, env.dim());
    let n2 = (n as f64).powi(2);
    let u = Uniformizer::new(&GeneratorMatrix::new(env, WalkKind::AlphaWalk));
    let sg: Vec<Vec<f64>> = t_grid
        .iter()
        .map(|&t| u.apply(&values, t * n2, 1e-12))
        .collect::<Result<_>>()?;
    init.sample(env, n, seed_schedule(seed, TaskKind::Sampler, 0, 0))?;
    let nt = t_grid.len();
    let m = replica_moments(replicas, 4 * nt, |r, out| {
        let cfg0 = init
            .sample(env, n, seed_schedule(seed, TaskKind::Sampler, 0, r as u64))
            .expect("validated initial law");
        let starts: Vec<f64> = sg.iter().map(|s| weighted_sum(s, cfg0.eta()) / scale).collect();
        let mut rng = rng_from_seed(seed_schedule(seed, TaskKind::Sep, 4, r as u64));
        let mut sep = DirectSep::new(env, cfg0).expect("validated");
        let mut now = 0.0;
        for (k, &t) in t_grid.iter().enumerate() {
            sep.advance((t - now) * n2, &mut rng, |_, _, _| {});
            now = t;
            let v = weighted_sum(&values, sep.config().eta()) / scale - starts[k];
            out[4 * k] = v;
            out[4 * k + 1] = v * v;
            out[4 * k + 2] = v * v * v;
            out[4 * k + 3] = v * v * v * v;
        }
    });
    let g2: f64 = values.iter().zip(env.alpha()).map(|(v, &a)| v * v * a as f64).sum();
    let bound = g2 / (2.0 * scale * scale);
    let k = replicas as f64;
    Ok(t_grid
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let (m1, m2, m3, m4) = (m.mean(4 * j), m.mean(4 * j + 1), m.mean(4 * j + 2), m.mean(4 * j + 3));
            let variance = (m2 - m1 * m1) * k / (k - 1.0);
            let central4 = m4 - 4.0 * m1 * m3 + 6.0 * m1 * m1 * m2 - 3.0 * m1.powi(4);
            let variance_stderr = ((central4 - variance * variance).max(0.0) / k).sqrt();
            VarianceBoundReport {
                n,
                t,
                replicas,
                mean: m1,
                variance,
                variance_stderr,
                bound,
                pass: variance <= bound + 4.0 * variance_stderr,
            }
        })
        .collect())
}

/// `X^N_t(G)` for each test function on a macroscopic time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityFieldSeries {
    pub n: usize,
    pub times: Vec<f64>,
    /// `values[g][k]` is the field of test function `g` at `times[k]`.
    pub values: Vec<Vec<f64>>,
    pub env_hash: String,
    pub seed: u64,
}

/// Runs SEP from `cfg0` to `max(times) N^2`, recording every field.
pub fn record_density_series(
    env: &Environment,
    cfg0: &ParticleConfig,
    n: usize,
    g_list: &[TestFunction],
    times: &[f64],
    seed: u64,
) -> Result<DensityFieldSeries> {
    let tables: Vec<Vec<f64>> = g_list
        .iter()
        .map(|g| lattice_values(g, env.torus(), n))
        .collect::<Result<_>>()?;
    let mut prev = 0.0;
    for &t in times {
        if !(t >= prev && t.is_finite()) {
            return Err(invalid("t_grid", "must be finite, non-negative and increasing"));
        }
        prev = t;
    }
    let scale = scale_factor(n, env.dim());
    let n2 = (n as f64).powi(2);
    let mut rng = rng_from_seed(seed);
    let mut sep = DirectSep::new(env, cfg0.clone())?;
    let mut values = vec![Vec::with_capacity(times.len()); g_list.len()];
    let mut now = 0.0;
    for &t in times {
        sep.advance((t - now) * n2, &mut rng, |_, _, _| {});
        now = t;
        for (gi, table) in tables.iter().enumerate() {
            values[gi].push(weighted_sum(table, sep.config().eta()) / scale);
        }
    }
    Ok(DensityFieldSeries {
        n,
        times: times.to_vec(),
        values,
        env_hash: env.content_hash(),
        seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HdlParams {
    pub law: EnvLaw,
    pub dim: usize,
    pub n_grid: Vec<usize>,
    pub rho_bar: MacroscopicProfile,
    pub g_list: Vec<TestFunction>,
    pub t_grid: Vec<f64>,
    pub sigma: Vec<Vec<f64>>,
    pub sigma_source: String,
    pub environments: usize,
    pub replicas: usize,
    pub seed: u64,
    pub event_cap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HdlEntry {
    pub n: usize,
    pub t: f64,
    pub g_id: usize,
    /// Mean of `X^N_t(G)` over all runs.
    pub empirical: f64,
    pub limit: f64,
    /// Mean of `|X^N_t(G) - pi_t(G)|` over all runs.
    pub abs_err: f64,
    /// Standard error of `abs_err`.
    pub stderr: f64,
    /// `empirical - limit`.
    pub bias: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleError {
    pub n: usize,
    pub err: f64,
    pub stderr: f64,
    pub worst_t: f64,
    pub worst_g: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HdlSample {
    pub n: usize,
    pub t: f64,
    pub g_id: usize,
    pub replica: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub params: HdlParams,
    pub mean_alpha: f64,
    pub projected_events: f64,
    pub env_hashes: Vec<Vec<String>>,
    pub entries: Vec<HdlEntry>,
    pub scales: Vec<ScaleError>,
    #[serde(skip)]
    pub samples: Vec<HdlSample>,
}

impl ExperimentReport {
    /// Long-format CSV `N,t,G_id,replica,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("N,t,G_id,replica,value\n");
        for s in &self.samples {
            let _ = writeln!(out, "{},{},{},{},{}", s.n, s.t, s.g_id, s.replica, s.value);
        }
        out
    }

    /// `err(N)` is non-increasing up to twice the combined stderr.
    pub fn monotone_within_noise(&self) -> bool {
        self.scales.windows(2).all(|w| {
            let slack = 2.0 * (w[0].stderr.powi(2) + w[1].stderr.powi(2)).sqrt();
            w[1].err <= w[0].err + slack
        })
    }

    /// `0.05 E[alpha_0] int |G|` for the largest `int |G|` in the list.
    pub fn threshold(&self) -> f64 {
        let g = self.params.g_list.iter().map(|g| g.abs_integral()).fold(0.0, f64::max);
        0.05 * self.mean_alpha * g
    }
}

/// Expected number of SEP events for the whole experiment, using the
/// initial mean bond rate `E[alpha]^2 rho (1 - rho)` per directed bond.
pub fn projected_events(p: &HdlParams) -> f64 {
    let m = p.law.mean();
    let grid = 1024;
    let mean_var: f64 = (0..grid)
        .map(|i| {
            let u = vec![(i as f64 + 0.5) / grid as f64; p.dim];
            let r = p.rho_bar.eval(&u);
            r * (1.0 - r)
        })
        .sum::<f64>()
        / grid as f64;
    let horizon = p.t_grid.iter().copied().fold(0.0, f64::max);
    p.n_grid
        .iter()
        .map(|&n| {
            let sites = (n as f64).powi(p.dim as i32);
            let rate = 2.0 * p.dim as f64 * sites * m * m * mean_var;
            (p.environments * p.replicas) as f64 * rate * horizon * (n as f64).powi(2)
        })
        .sum()
}

pub fn hdl_experiment(p: &HdlParams) -> Result<ExperimentReport> {
    p.law.validate()?;
    p.rho_bar.validate(p.dim)?;
    cholesky(&p.sigma)?;
    if p.sigma.len() != p.dim {
        return Err(SepError::InvalidDims("Sigma does not match d".into()));
    }
    if p.g_list.is_empty() || p.n_grid.is_empty() || p.t_grid.is_empty() {
        return Err(invalid("hdl", "N_grid, G_list and t_grid must be non-empty"));
    }
    if p.environments == 0 || p.replicas == 0 {
        return Err(invalid("hdl", "environments and replicas must be positive"));
    }
    let projected = projected_events(p);
    if projected > p.event_cap {
        return Err(SepError::Budget {
            projected,
            cap: p.event_cap,
        });
    }
    let mean_alpha = p.law.mean();
    let limits: Vec<Vec<f64>> = p
        .g_list
        .iter()
        .map(|g| {
            p.t_grid
                .iter()
                .map(|&t| limit_field(mean_alpha, &p.sigma, &p.rho_bar, g, t))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let runs = p.environments * p.replicas;
    let mut entries = Vec::new();
    let mut scales = Vec::new();
    let mut samples = Vec::new();
    let mut env_hashes = Vec::new();
    for (ni, &n) in p.n_grid.iter().enumerate() {
        let dims = vec![n; p.dim];
        let envs: Vec<Environment> = (0..p.environments)
            .map(|e| {
                let key = ((ni as u64) << 32) | e as u64;
                Environment::sample(&p.law, &dims, seed_schedule(p.seed, TaskKind::Environment, key, 0))
            })
            .collect::<Result<_>>()?;
        env_hashes.push(envs.iter().map(Environment::content_hash).collect());
        let series: Vec<Result<DensityFieldSeries>> = replica_map(runs, |task| {
            let (e, r) = (task / p.replicas, task % p.replicas);
            let key = ((ni as u64) << 32) | e as u64;
            let env = &envs[e];
            let cfg0 = sample_profile(
                env,
                &p.rho_bar,
                n,
                seed_schedule(p.seed, TaskKind::Sampler, key, r as u64),
            )?;
            record_density_series(
                env,
                &cfg0,
                n,
                &p.g_list,
                &p.t_grid,
                seed_schedule(p.seed, TaskKind::Hydrodynamics, key, r as u64),
            )
        });
        let series: Vec<DensityFieldSeries> = series.into_iter().collect::<Result<_>>()?;
        let mut worst = ScaleError {
            n,
            err: -1.0,
            stderr: 0.0,
            worst_t: 0.0,
            worst_g: 0,
        };
        for (gi, lim) in limits.iter().enumerate() {
            for (k, &t) in p.t_grid.iter().enumerate() {
                let xs: Vec<f64> = series.iter().map(|s| s.values[gi][k]).collect();
                let errs: Vec<f64> = xs.iter().map(|x| (x - lim[k]).abs()).collect();
                let (abs_err, stderr) = mean_stderr(&errs);
                let empirical = crate::stats::mean(&xs);
                for (replica, &value) in xs.iter().enumerate() {
                    samples.push(HdlSample {
                        n,
                        t,
                        g_id: gi,
                        replica,
                        value,
                    });
                }
                if abs_err > worst.err {
                    worst = ScaleError {
                        n,
                        err: abs_err,
                        stderr,
                        worst_t: t,
                        worst_g: gi,
                    };
                }
                entries.push(HdlEntry {
                    n,
                    t,
                    g_id: gi,
                    empirical,
                    limit: lim[k],
                    abs_err,
                    stderr,
                    bias: empirical - lim[k],
                });
            }
        }
        scales.push(worst);
    }
    Ok(ExperimentReport {
        params: p.clone(),
        mean_alpha,
        projected_events: projected,
        env_hashes,
        entries,
        scales,
        samples,
    })
}
