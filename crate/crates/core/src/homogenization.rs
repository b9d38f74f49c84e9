//! Effective diffusivity of RW(alpha) and diagnostics of the invariance
//! principle in semigroup form.
//!
//! Convention: the limit generator is `(1/2) div(Sigma grad)`, so the
//! homogeneous walk with `alpha = 1` has `Sigma = 2 I` and
//! `Cov(X_t) ~ t Sigma`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::environment::{EnvLaw, Environment};
use crate::error::{invalid, Result, SepError};
use crate::hydrodynamics::{cholesky, heat_kernel_density, lattice_values, GaussianSemigroup, TestFunction};
use crate::lattice::Torus;
use crate::rng::{rng_from_seed, seed_schedule, SimRng, TaskKind};
use crate::semigroup::Uniformizer;
use crate::stats::{mean_stderr, ols};
use crate::walk::{GeneratorMatrix, WalkKind, WalkTables};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaMethod {
    MsdAlphaWalk,
    MsdOmegaWalkTimechange,
    Corrector1d,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeChangeDiagnostics {
    /// Slope of the omega-walk covariance in omega time.
    pub lambda_hat: Vec<Vec<f64>>,
    pub lambda_stderr: Vec<Vec<f64>>,
    /// Spatial mean of alpha, the stationary mean of `alpha_{X_s}`.
    pub mean_alpha_hat: f64,
    /// `lambda_hat / mean_alpha_hat`.
    pub ratio: Vec<Vec<f64>>,
    /// Largest `|sigma - ratio| / combined stderr` over entries.
    pub max_standardized_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaEstimate {
    pub sigma: Vec<Vec<f64>>,
    pub stderr: Vec<Vec<f64>>,
    pub method: SigmaMethod,
    pub replicas: usize,
    pub horizon: f64,
    pub dims: Vec<usize>,
    pub env_hash: String,
    /// Smallest R^2 of the pooled covariance-versus-time regressions.
    pub r_squared: f64,
    pub time_change: Option<TimeChangeDiagnostics>,
}

impl SigmaEstimate {
    pub fn dim(&self) -> usize {
        self.sigma.len()
    }

    /// Symmetric within `3 stderr` and positive definite.
    pub fn check_invariants(&self) -> Result<()> {
        let d = self.dim();
        for i in 0..d {
            for j in 0..i {
                let se = (self.stderr[i][j].powi(2) + self.stderr[j][i].powi(2)).sqrt();
                if (self.sigma[i][j] - self.sigma[j][i]).abs() > 3.0 * se + 1e-12 {
                    return Err(invalid("Sigma", "estimate is not symmetric"));
                }
            }
        }
        cholesky(&self.symmetrized()).map(|_| ())
    }

    pub fn symmetrized(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
        (0..d)
            .map(|i| (0..d).map(|j| 0.5 * (self.sigma[i][j] + self.sigma[j][i])).collect())
            .collect()
    }

    /// Smallest eigenvalue (closed form for `d <= 2`, Jacobi otherwise).
    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.symmetrized())
    }
}

fn min_eigenvalue(m: &[Vec<f64>]) -> f64 {
    let d = m.len();
    match d {
        1 => m[0][0],
        2 => {
            let tr = m[0][0] + m[1][1];
            let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            0.5 * (tr - (tr * tr - 4.0 * det).max(0.0).sqrt())
        }
        _ => {
            let mut a = m.to_vec();
            for _ in 0..100 {
                let mut off = 0.0;
                for p in 0..d {
                    for q in p + 1..d {
                        off += a[p][q] * a[p][q];
                        if a[p][q].abs() < 1e-300 {
                            continue;
                        }
                        let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                        let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                        let t = if theta == 0.0 { 1.0 } else { t };
                        let c = 1.0 / (t * t + 1.0).sqrt();
                        let s = t * c;
                        for k in 0..d {
                            let (akp, akq) = (a[k][p], a[k][q]);
                            a[k][p] = c * akp - s * akq;
                            a[k][q] = s * akp + c * akq;
                        }
                        for k in 0..d {
                            let (apk, aqk) = (a[p][k], a[q][k]);
                            a[p][k] = c * apk - s * aqk;
                            a[q][k] = s * apk + c * aqk;
                        }
                    }
                }
                if off < 1e-30 {
                    break;
                }
            }
            (0..d).map(|i| a[i][i]).fold(f64::INFINITY, f64::min)
        }
    }
}

/// Knobs of the MSD estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MsdOptions {
    /// Regression points in `[T/2, T]`.
    pub grid_points: usize,
    /// Batches of contiguous replicas used for standard errors.
    pub batches: usize,
}

impl Default for MsdOptions {
    fn default() -> Self {
        MsdOptions {
            grid_points: 16,
            batches: 32,
        }
    }
}

/// Samples `x` with probability proportional to `weight[x]`.
struct SiteSampler {
    cumulative: Vec<u64>,
}

impl SiteSampler {
    fn new(weights: impl Iterator<Item = u64>) -> Self {
        let mut acc = 0;
        SiteSampler {
            cumulative: weights
                .map(|w| {
                    acc += w;
                    acc
                })
                .collect(),
        }
    }

    fn sample(&self, rng: &mut SimRng) -> usize {
        let u = rng.random_range(0..*self.cumulative.last().unwrap());
        self.cumulative.partition_point(|&c| c <= u)
    }
}

/// Accumulates `sum X_i` and `sum X_i X_j` per grid time.
struct CovAccumulator {
    d: usize,
    k: usize,
    count: usize,
    s1: Vec<f64>,
    s2: Vec<f64>,
}

impl CovAccumulator {
    fn new(d: usize, k: usize) -> Self {
        CovAccumulator {
            d,
            k,
            count: 0,
            s1: vec![0.0; k * d],
            s2: vec![0.0; k * d * d],
        }
    }

    fn add(&mut self, disp: &[i64]) {
        let d = self.d;
        self.count += 1;
        for k in 0..self.k {
            for i in 0..d {
                let xi = disp[k * d + i] as f64;
                self.s1[k * d + i] += xi;
                for j in 0..d {
                    self.s2[(k * d + i) * d + j] += xi * disp[k * d + j] as f64;
                }
            }
        }
    }

    fn merge(&mut self, other: &CovAccumulator) {
        self.count += other.count;
        for (a, b) in self.s1.iter_mut().zip(&other.s1) {
            *a += b;
        }
        for (a, b) in self.s2.iter_mut().zip(&other.s2) {
            *a += b;
        }
    }

    fn cov(&self, k: usize, i: usize, j: usize) -> f64 {
        let n = self.count as f64;
        let d = self.d;
        self.s2[(k * d + i) * d + j] / n - self.s1[k * d + i] * self.s1[k * d + j] / (n * n)
    }

    /// Slopes of `Cov(X_i, X_j)` against `times`, with the R^2 of each.
    fn slopes(&self, times: &[f64]) -> (Vec<Vec<f64>>, f64) {
        let d = self.d;
        let mut r2: f64 = 1.0;
        let slopes = (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| {
                        let y: Vec<f64> = (0..self.k).map(|k| self.cov(k, i, j)).collect();
                        let fit = ols(times, &y);
                        if i == j {
                            r2 = r2.min(fit.r_squared);
                        }
                        fit.slope
                    })
                    .collect()
            })
            .collect();
        (slopes, r2)
    }
}

struct BatchResult {
    alpha_time: CovAccumulator,
    omega_time: Option<CovAccumulator>,
    max_abs: Vec<i64>,
}

fn regression_grid(horizon: f64, k: usize) -> Vec<f64> {
    (0..k)
        .map(|i| horizon * (0.5 + 0.5 * i as f64 / (k - 1) as f64))
        .collect()
}

/// Runs an omega walk and records the displacement both along the
/// time-changed clock `R` (at `alpha_grid`) and in omega time.
fn observe_time_changed(
    tables: &WalkTables,
    x0: usize,
    alpha_grid: &[f64],
    omega_grid: &[f64],
    rng: &mut SimRng,
    disp_alpha: &mut [i64],
    disp_omega: &mut [i64],
) {
    let torus = tables.torus();
    let d = torus.dim();
    let mut pos = vec![0i64; d];
    let (mut x, mut tw, mut r) = (x0, 0.0, 0.0);
    let (mut ka, mut kw) = (0, 0);
    while ka < alpha_grid.len() || kw < omega_grid.len() {
        let (dt, slot) = tables.step(x, rng);
        let next_w = tw + dt;
        let next_r = r + tables.alpha(x) as f64 * dt;
        while ka < alpha_grid.len() && alpha_grid[ka] < next_r {
            disp_alpha[ka * d..(ka + 1) * d].copy_from_slice(&pos);
            ka += 1;
        }
        while kw < omega_grid.len() && omega_grid[kw] < next_w {
            disp_omega[kw * d..(kw + 1) * d].copy_from_slice(&pos);
            kw += 1;
        }
        tw = next_w;
        r = next_r;
        let (axis, sign) = Torus::slot_axis(slot);
        pos[axis] += sign;
        x = torus.neighbour(x, slot);
    }
}

/// MSD estimate of `Sigma` on one environment. Walkers start from the
/// walk's reversible measure (`alpha` for RW(alpha), uniform for
/// RW(omega)); displacements are unwrapped.
pub fn estimate_sigma_msd_env(
    env: &Environment,
    method: SigmaMethod,
    horizon: f64,
    replicas: usize,
    seed: u64,
    opts: MsdOptions,
) -> Result<SigmaEstimate> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(invalid("horizon", "must be positive and finite"));
    }
    if opts.grid_points < 2 || opts.batches < 2 {
        return Err(invalid("msd", "need at least two grid points and two batches"));
    }
    if replicas < 2 * opts.batches {
        return Err(invalid(
            "replicas",
            format!("need at least {} replicas", 2 * opts.batches),
        ));
    }
    let d = env.dim();
    let k = opts.grid_points;
    let grid = regression_grid(horizon, k);
    let mean_alpha = env.mean_alpha();
    let (tables, sampler) = match method {
        SigmaMethod::MsdAlphaWalk => (
            WalkTables::new(env, WalkKind::AlphaWalk),
            SiteSampler::new(env.alpha().iter().map(|&a| a as u64)),
        ),
        SigmaMethod::MsdOmegaWalkTimechange => (
            WalkTables::new(env, WalkKind::OmegaWalk),
            SiteSampler::new(std::iter::repeat_n(1, env.size())),
        ),
        SigmaMethod::Corrector1d => {
            return Err(SepError::Unsupported(
                "use sigma_periodic_1d for the corrector method".into(),
            ))
        }
    };
    let omega_grid: Vec<f64> = grid.iter().map(|t| t / mean_alpha).collect();
    let batches = opts.batches;
    let results: Vec<BatchResult> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let lo = b * replicas / batches;
            let hi = (b + 1) * replicas / batches;
            let mut acc = CovAccumulator::new(d, k);
            let mut acc_w = CovAccumulator::new(d, k);
            let mut disp = vec![0i64; k * d];
            let mut disp_w = vec![0i64; k * d];
            let mut max_abs = vec![0i64; d];
            for r in lo..hi {
                let mut rng = rng_from_seed(seed_schedule(seed, TaskKind::Homogenization, 0, r as u64));
                let x0 = sampler.sample(&mut rng);
                match method {
                    SigmaMethod::MsdAlphaWalk => {
                        tables.observe_on_grid(x0, &grid, &mut rng, &mut disp, None);
                    }
                    _ => {
                        observe_time_changed(&tables, x0, &grid, &omega_grid, &mut rng, &mut disp, &mut disp_w);
                        acc_w.add(&disp_w);
                    }
                }
                acc.add(&disp);
                for i in 0..d {
                    max_abs[i] = max_abs[i].max(disp[(k - 1) * d + i].abs());
                }
            }
            BatchResult {
                alpha_time: acc,
                omega_time: (method == SigmaMethod::MsdOmegaWalkTimechange).then_some(acc_w),
                max_abs,
            }
        })
        .collect();
    for i in 0..d {
        let worst = results.iter().map(|r| r.max_abs[i]).max().unwrap_or(0);
        if 2 * worst.unsigned_abs() as usize >= env.dims()[i] {
            return Err(SepError::WrapAmbiguity {
                displacement: worst,
                side: env.dims()[i],
            });
        }
    }
    let summarize = |accs: Vec<&CovAccumulator>, times: &[f64]| {
        let per_batch: Vec<Vec<Vec<f64>>> = accs.iter().map(|a| a.slopes(times).0).collect();
        let mut pooled = CovAccumulator::new(d, k);
        for a in &accs {
            pooled.merge(a);
        }
        let r2 = pooled.slopes(times).1;
        let mut est = vec![vec![0.0; d]; d];
        let mut se = vec![vec![0.0; d]; d];
        for i in 0..d {
            for j in 0..d {
                let v: Vec<f64> = per_batch.iter().map(|s| s[i][j]).collect();
                let (m, e) = mean_stderr(&v);
                est[i][j] = m;
                se[i][j] = e;
            }
        }
        (est, se, r2)
    };
    let (sigma, stderr, r_squared) = summarize(results.iter().map(|r| &r.alpha_time).collect(), &grid);
    let time_change = if method == SigmaMethod::MsdOmegaWalkTimechange {
        let (lambda_hat, lambda_stderr, _) = summarize(
            results.iter().map(|r| r.omega_time.as_ref().unwrap()).collect(),
            &omega_grid,
        );
        let ratio: Vec<Vec<f64>> = lambda_hat
            .iter()
            .map(|r| r.iter().map(|v| v / mean_alpha).collect())
            .collect();
        let mut gap: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                let se = (stderr[i][j].powi(2) + (lambda_stderr[i][j] / mean_alpha).powi(2)).sqrt();
                gap = gap.max(crate::stats::standardized(sigma[i][j], ratio[i][j], se).abs());
            }
        }
        Some(TimeChangeDiagnostics {
            lambda_hat,
            lambda_stderr,
            mean_alpha_hat: mean_alpha,
            ratio,
            max_standardized_gap: gap,
        })
    } else {
        None
    };
    Ok(SigmaEstimate {
        sigma,
        stderr,
        method,
        replicas,
        horizon,
        dims: env.dims().to_vec(),
        env_hash: env.content_hash(),
        r_squared,
        time_change,
    })
}

/// Samples one environment from `(law, dims, seed)` and estimates `Sigma`.
pub fn estimate_sigma_msd(
    law: &EnvLaw,
    dims: &[usize],
    method: SigmaMethod,
    horizon: f64,
    replicas: usize,
    seed: u64,
) -> Result<SigmaEstimate> {
    let env = Environment::sample(law, dims, seed_schedule(seed, TaskKind::Environment, 0, 0))?;
    estimate_sigma_msd_env(&env, method, horizon, replicas, seed, MsdOptions::default())
}

/// `2 / (E[1/alpha]^2 E[alpha])` for an i.i.d. law in one dimension.
pub fn sigma_oracle_1d(law: &EnvLaw) -> Result<f64> {
    law.validate()?;
    if !law.is_iid() {
        return Err(SepError::Unsupported(
            "the closed-form oracle needs an i.i.d. law".into(),
        ));
    }
    Ok(2.0 / (law.mean_inverse().powi(2) * law.mean()))
}

/// Exact `Sigma` of the periodic 1-D environment: the conductance walk has
/// `Lambda = 2 / mean_b(1 / omega_b)`, and `Sigma = Lambda / mean(alpha)`.
pub fn sigma_periodic_1d(env: &Environment) -> Result<SigmaEstimate> {
    if env.dim() != 1 {
        return Err(SepError::Unsupported("corrector formula is one-dimensional".into()));
    }
    let n = env.size();
    let inv_omega: f64 = (0..n)
        .map(|x| 1.0 / (env.at(x) as f64 * env.at((x + 1) % n) as f64))
        .sum::<f64>()
        / n as f64;
    let sigma = 2.0 / inv_omega / env.mean_alpha();
    Ok(SigmaEstimate {
        sigma: vec![vec![sigma]],
        stderr: vec![vec![0.0]],
        method: SigmaMethod::Corrector1d,
        replicas: 0,
        horizon: f64::INFINITY,
        dims: env.dims().to_vec(),
        env_hash: env.content_hash(),
        r_squared: 1.0,
        time_change: None,
    })
}

fn scale_of(env: &Environment) -> Result<usize> {
    let n = env.dims()[0];
    if env.dims().iter().any(|&l| l != n) {
        return Err(SepError::InvalidDims(
            "scaling diagnostics need a cubic torus viewed as the unit torus".into(),
        ));
    }
    Ok(n)
}

fn site_point(torus: &Torus, x: usize, n: usize) -> Vec<f64> {
    torus.coords(x).iter().map(|&c| c as f64 / n as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub n_grid: Vec<usize>,
    pub t_grid: Vec<f64>,
    /// Per environment: `sup_t sup_x |S^N_{t N^2} G(x/N) - S^Sigma_t G(x/N)|`.
    pub sup_metric: Vec<f64>,
    /// Per environment: `sup_t N^-d sum_x |...| alpha_x`.
    pub l1_metric: Vec<f64>,
}

/// Compares the rescaled walk semigroup with the continuum Gaussian
/// semigroup over `t_grid` and `horizon`; each environment lives on the
/// torus of side `N`.
pub fn semigroup_convergence(
    envs: &[Environment],
    g: &TestFunction,
    sigma: &[Vec<f64>],
    horizon: f64,
    t_grid: &[f64],
) -> Result<ConvergenceReport> {
    cholesky(sigma)?;
    let mut times = t_grid.to_vec();
    times.push(horizon);
    times.sort_by(f64::total_cmp);
    times.dedup();
    if times.iter().any(|&t| !(t >= 0.0 && t.is_finite())) {
        return Err(invalid("t_grid", "times must be finite and non-negative"));
    }
    if times[0] < 0.0 {
        return Err(invalid("t_grid", "times must be non-negative"));
    }
    let results: Vec<Result<(usize, f64, f64)>> = envs
        .par_iter()
        .map(|env| {
            let n = scale_of(env)?;
            let d = env.dim();
            let torus = env.torus();
            let u = Uniformizer::new(&GeneratorMatrix::new(env, WalkKind::AlphaWalk));
            let initial = lattice_values(g, torus, n)?;
            let mut current = initial.clone();
            let scale = (n as f64).powi(d as i32);
            let points: Vec<Vec<f64>> = (0..torus.size()).map(|x| site_point(torus, x, n)).collect();
            let mut now = 0.0;
            let (mut sup, mut l1): (f64, f64) = (0.0, 0.0);
            for &t in &times {
                if t > now {
                    current = u.apply(&current, (t - now) * (n as f64).powi(2), 1e-12)?;
                    now = t;
                }
                let limit = (t > 0.0)
                    .then(|| GaussianSemigroup::new(g, sigma, t, &vec![1.0; d]))
                    .transpose()?;
                let mut s = 0.0;
                for x in 0..torus.size() {
                    let target = limit.as_ref().map_or(initial[x], |l| l.eval(&points[x]));
                    let diff = (current[x] - target).abs();
                    sup = sup.max(diff);
                    s += diff * env.at(x) as f64;
                }
                l1 = l1.max(s / scale);
            }
            Ok((n, sup, l1))
        })
        .collect();
    let mut report = ConvergenceReport {
        n_grid: Vec::new(),
        t_grid: times,
        sup_metric: Vec::new(),
        l1_metric: Vec::new(),
    };
    for r in results {
        let (n, s, l) = r?;
        report.n_grid.push(n);
        report.sup_metric.push(s);
        report.l1_metric.push(l);
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CltWeighting {
    /// `N^d p(0, y)` against `k_t(y / N)`.
    Plain,
    /// `N^d p(0, y) mean(alpha) / alpha_y` against `k_t(y / N)`.
    Alpha,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalCltReport {
    pub n_grid: Vec<usize>,
    pub t_grid: Vec<f64>,
    pub ell: f64,
    pub weighting: CltWeighting,
    pub metric: Vec<f64>,
    /// `(t, y)` attaining the metric, per environment.
    pub witness: Vec<(f64, usize)>,
}

/// `max_{|y/N| <= ell, t} |N^d p_{t N^2}(0, y) w_y - k^Sigma_t(y / N)|`.
pub fn local_clt_check(
    envs: &[Environment],
    sigma: &[Vec<f64>],
    t_grid: &[f64],
    ell: f64,
    weighting: CltWeighting,
) -> Result<LocalCltReport> {
    cholesky(sigma)?;
    if t_grid.is_empty() || t_grid.iter().any(|&t| !(t > 0.0)) {
        return Err(invalid("t_grid", "times must be bounded away from 0"));
    }
    let mut times = t_grid.to_vec();
    times.sort_by(f64::total_cmp);
    type Row = (usize, f64, (f64, usize));
    let results: Vec<Result<Row>> = envs
        .par_iter()
        .map(|env| {
            let n = scale_of(env)?;
            let d = env.dim();
            let torus = env.torus();
            let u = Uniformizer::new(&GeneratorMatrix::new(env, WalkKind::AlphaWalk));
            let mut law = vec![0.0; torus.size()];
            law[0] = 1.0;
            let scale = (n as f64).powi(d as i32);
            let mean_alpha = env.mean_alpha();
            let mut now = 0.0;
            let mut worst = (0.0, (times[0], 0));
            for &t in &times {
                law = u.apply_transpose(&law, (t - now) * (n as f64).powi(2), 1e-12)?;
                now = t;
                for y in 0..torus.size() {
                    if torus.distance(0, y) / n as f64 > ell {
                        continue;
                    }
                    let w = match weighting {
                        CltWeighting::Plain => 1.0,
                        CltWeighting::Alpha => mean_alpha / env.at(y) as f64,
                    };
                    let point: Vec<f64> = torus.displacement(0, y).iter().map(|&c| c as f64 / n as f64).collect();
                    let k = heat_kernel_density(sigma, t, &point, &vec![1.0; d])?;
                    let diff = (scale * law[y] * w - k).abs();
                    if diff > worst.0 {
                        worst = (diff, (t, y));
                    }
                }
            }
            Ok((n, worst.0, worst.1))
        })
        .collect();
    let mut report = LocalCltReport {
        n_grid: Vec::new(),
        t_grid: times,
        ell,
        weighting,
        metric: Vec::new(),
        witness: Vec::new(),
    };
    for r in results {
        let (n, m, w) = r?;
        report.n_grid.push(n);
        report.metric.push(m);
        report.witness.push(w);
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderReport {
    pub n: usize,
    pub c_hat: f64,
    pub gamma_hat: f64,
    /// `exp(intercept)` of the log-log regression.
    pub c_regression: f64,
    pub pairs_used: usize,
    /// Fraction of pairs above `c_hat * r^gamma_hat` (0 by construction).
    pub violation_fraction: f64,
    /// Fraction above the regression line `c_regression * r^gamma_hat`.
    pub regression_violation_fraction: f64,
    /// Every sampled increment vanished.
    pub degenerate: bool,
}

/// Fits `|S_{tN^2}G(x/N) - S_{sN^2}G(y/N)| <= C |G|_inf (r / sqrt(t ^ s))^gamma`,
/// `r = max(sqrt|t - s|, |x/N - y/N|)`, over `pairs` random space-time
/// pairs on a 16-point time grid in `t_range`. Sample points are drawn in
/// macroscopic coordinates so the same `seed` probes the same points at
/// every scale.
pub fn holder_modulus_estimate(
    env: &Environment,
    g: &TestFunction,
    t_range: (f64, f64),
    pairs: usize,
    seed: u64,
) -> Result<HolderReport> {
    let (t0, t1) = t_range;
    if !(t0 > 0.0 && t1 >= t0 && t1.is_finite()) {
        return Err(invalid("t_range", "must be bounded away from 0"));
    }
    let n = scale_of(env)?;
    let d = env.dim();
    let torus = env.torus();
    let steps = 16;
    let times: Vec<f64> = (0..steps)
        .map(|i| t0 + (t1 - t0) * i as f64 / (steps - 1) as f64)
        .collect();
    let u = Uniformizer::new(&GeneratorMatrix::new(env, WalkKind::AlphaWalk));
    let mut fields = Vec::with_capacity(steps);
    let mut current = lattice_values(g, torus, n)?;
    let mut now = 0.0;
    for &t in &times {
        current = u.apply(&current, (t - now) * (n as f64).powi(2), 1e-12)?;
        now = t;
        fields.push(current.clone());
    }
    let sup = g.sup_norm();
    let mut rng = rng_from_seed(seed);
    let mut logs = Vec::new();
    let mut raw = Vec::new();
    let mut degenerate = true;
    for _ in 0..pairs {
        let i = rng.random_range(0..steps);
        let j = rng.random_range(0..steps);
        let site = |rng: &mut SimRng| {
            let c: Vec<usize> = (0..d)
                .map(|_| ((rng.random::<f64>() * n as f64).floor() as usize) % n)
                .collect();
            torus.index(&c)
        };
        let x = site(&mut rng);
        let y = site(&mut rng);
        let lhs = (fields[i][x] - fields[j][y]).abs() / sup;
        let r = (times[i] - times[j]).abs().sqrt().max(torus.distance(x, y) / n as f64) / times[i].min(times[j]).sqrt();
        // Round-off of the semigroup is not an increment.
        let lhs = if lhs > 1e-12 { lhs } else { 0.0 };
        if lhs > 0.0 {
            degenerate = false;
        }
        if lhs > 0.0 && r > 0.0 {
            logs.push((r.ln(), lhs.ln()));
            raw.push((r, lhs));
        }
    }
    if degenerate || logs.len() < 2 {
        return Ok(HolderReport {
            n,
            c_hat: 0.0,
            gamma_hat: 0.0,
            c_regression: 0.0,
            pairs_used: logs.len(),
            violation_fraction: 0.0,
            regression_violation_fraction: 0.0,
            degenerate: true,
        });
    }
    let xs: Vec<f64> = logs.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = logs.iter().map(|p| p.1).collect();
    let fit = ols(&xs, &ys);
    let gamma = fit.slope;
    let c_hat = raw.iter().map(|&(r, l)| l / r.powf(gamma)).fold(0.0, f64::max);
    let c_reg = fit.intercept.exp();
    let count = |c: f64| {
        raw.iter()
            .filter(|&&(r, l)| l > c * r.powf(gamma) * (1.0 + 1e-12))
            .count()
    };
    Ok(HolderReport {
        n,
        c_hat,
        gamma_hat: gamma,
        c_regression: c_reg,
        pairs_used: raw.len(),
        violation_fraction: count(c_hat) as f64 / raw.len() as f64,
        regression_violation_fraction: count(c_reg) as f64 / raw.len() as f64,
        degenerate: false,
    })
}
