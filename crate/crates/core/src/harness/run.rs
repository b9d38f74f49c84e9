use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::config::{Command, ExperimentConfig};
use crate::environment::{conductances, Environment, LawKind};
use crate::error::{Result, SepError};
use crate::exclusion::{
    binomial_measure_sampler, duality_check, ladder_direct_comparison, multi_duality_check, reversibility_check,
    sep_trajectories_to_csv, simulate_sep_direct, DualityReport, ParticleConfig,
};
use crate::homogenization::{estimate_sigma_msd_env, sigma_oracle_1d, MsdOptions, SigmaEstimate};
use crate::hydrodynamics::{hdl_experiment, HdlParams, MacroscopicProfile, TestFunction};
use crate::parallel::replica_map;
use crate::report::CheckReport;
use crate::rng::{rng_from_seed, seed_schedule, TaskKind};
use crate::semigroup::{semigroup, DENSE_LIMIT};
use crate::walk::{simulate_walk, trajectories_to_csv, GeneratorMatrix};

/// Exit status: every enabled check passed.
pub const EXIT_PASS: i32 = 0;
/// Exit status: a check failed.
pub const EXIT_FAIL: i32 = 1;
/// Exit status: the configuration is invalid or incomplete.
pub const EXIT_CONFIG: i32 = 2;
/// Exit status: the projected cost exceeds the configured budget.
pub const EXIT_BUDGET: i32 = 3;
/// Exit status: the run itself failed.
pub const EXIT_RUNTIME: i32 = 4;

pub fn exit_code(e: &SepError) -> i32 {
    match e {
        SepError::MissingField(_)
        | SepError::InvalidConfig(_)
        | SepError::InvalidLaw(_)
        | SepError::InvalidDims(_)
        | SepError::InvalidParameter { .. }
        | SepError::Parse(_) => EXIT_CONFIG,
        SepError::Budget { .. } | SepError::TooLarge { .. } => EXIT_BUDGET,
        _ => EXIT_RUNTIME,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: Command,
    pub config: ExperimentConfig,
    pub env_hashes: Vec<String>,
    pub checks: Vec<CheckReport>,
    pub pass: bool,
    pub result: Value,
    #[serde(skip)]
    pub csv: String,
}

impl RunReport {
    fn new(
        config: &ExperimentConfig,
        env_hashes: Vec<String>,
        checks: Vec<CheckReport>,
        result: Value,
        csv: String,
    ) -> Self {
        RunReport {
            command: config.command,
            config: config.clone(),
            env_hashes,
            pass: checks.iter().all(|c| c.pass),
            checks,
            result,
            csv,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn exit_code(&self) -> i32 {
        if self.pass {
            EXIT_PASS
        } else {
            EXIT_FAIL
        }
    }

    /// Writes `<out>.json` and/or `<out>.csv` and returns the paths.
    pub fn write(&self, out: &Path) -> Result<Vec<PathBuf>> {
        if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let mut written = Vec::new();
        if self.config.format.json() {
            let p = out.with_extension("json");
            std::fs::write(&p, self.to_json()?)?;
            written.push(p);
        }
        if self.config.format.csv() {
            let p = out.with_extension("csv");
            std::fs::write(&p, &self.csv)?;
            written.push(p);
        }
        Ok(written)
    }
}

/// Runs the configured command on a pool of `config.threads` workers.
pub fn run(config: &ExperimentConfig) -> Result<RunReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| SepError::InvalidConfig(format!("threads: {e}")))?;
    pool.install(|| match config.command {
        Command::Env => run_env(config),
        Command::Walk => run_walk(config),
        Command::Sep => run_sep(config),
        Command::Homog => run_homog(config),
        Command::Hdl => run_hdl(config),
        Command::CheckAll => run_check_all(config),
    })
}

fn sample_env(config: &ExperimentConfig) -> Result<Environment> {
    Environment::sample(
        config.law(),
        config.dims(),
        seed_schedule(config.seed, TaskKind::Environment, 0, 0),
    )
}

#[derive(Serialize)]
struct EnvResult<'a> {
    environment: &'a Environment,
    mean_alpha: f64,
    min_conductance: u64,
    max_conductance: u64,
}

fn run_env(config: &ExperimentConfig) -> Result<RunReport> {
    let env = sample_env(config)?;
    let omega = conductances(&env);
    let mut csv = String::from("site");
    for k in 0..env.dim() {
        let _ = write!(csv, ",x{k}");
    }
    csv.push_str(",alpha\n");
    for x in 0..env.size() {
        let _ = write!(csv, "{x}");
        for c in env.torus().coords(x) {
            let _ = write!(csv, ",{c}");
        }
        let _ = writeln!(csv, ",{}", env.at(x));
    }
    let result = serde_json::to_value(EnvResult {
        environment: &env,
        mean_alpha: env.mean_alpha(),
        min_conductance: omega.min(),
        max_conductance: omega.max(),
    })?;
    Ok(RunReport::new(
        config,
        vec![env.content_hash()],
        Vec::new(),
        result,
        csv,
    ))
}

#[derive(Serialize)]
struct WalkResult {
    replicas: usize,
    horizon: f64,
    start: usize,
    mean_jumps: f64,
    final_sites: Vec<usize>,
}

fn run_walk(config: &ExperimentConfig) -> Result<RunReport> {
    let env = sample_env(config)?;
    let horizon = config.horizon();
    let trajs = replica_map(config.replicas, |r| {
        simulate_walk(
            &env,
            config.walk_kind,
            config.start,
            horizon,
            seed_schedule(config.seed, TaskKind::Walk, 0, r as u64),
        )
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut invalid = 0;
    for t in &trajs {
        if t.validate(env.torus()).is_err() {
            invalid += 1;
        }
    }
    let mut checks = vec![CheckReport::new(
        "trajectory_validity",
        trajs.len(),
        invalid as f64,
        0.0,
    )];
    if env.size() <= DENSE_LIMIT {
        let gen = GeneratorMatrix::new(&env, config.walk_kind);
        let p = semigroup(&gen, horizon, 1e-13)?;
        checks.push(CheckReport::new("row_sums", env.size(), p.max_row_sum_error(), 1e-8));
        if config.walk_kind == crate::walk::WalkKind::AlphaWalk {
            checks.push(CheckReport::new(
                "detailed_balance",
                env.size() * env.size(),
                p.max_reversibility_violation(&env),
                1e-8,
            ));
        }
    }
    let result = serde_json::to_value(WalkResult {
        replicas: trajs.len(),
        horizon,
        start: config.start,
        mean_jumps: crate::stats::mean(&trajs.iter().map(|t| t.jumps() as f64).collect::<Vec<_>>()),
        final_sites: trajs.iter().map(|t| t.final_site()).collect(),
    })?;
    Ok(RunReport::new(
        config,
        vec![env.content_hash()],
        checks,
        result,
        trajectories_to_csv(&trajs),
    ))
}

#[derive(Serialize)]
struct SepResult {
    replicas: usize,
    horizon: f64,
    density: f64,
    particles: Vec<u64>,
    events: Vec<usize>,
    final_configs: Vec<ParticleConfig>,
}

fn run_sep(config: &ExperimentConfig) -> Result<RunReport> {
    let env = sample_env(config)?;
    let horizon = config.horizon();
    let trajs = replica_map(config.replicas, |r| {
        let cfg0 = binomial_measure_sampler(
            &env,
            config.density,
            seed_schedule(config.seed, TaskKind::Sampler, 0, r as u64),
        )?;
        simulate_sep_direct(
            &env,
            &cfg0,
            horizon,
            seed_schedule(config.seed, TaskKind::Sep, 0, r as u64),
        )
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let finals = trajs.iter().map(|t| t.replay(&env)).collect::<Result<Vec<_>>>()?;
    let lost = trajs
        .iter()
        .zip(&finals)
        .filter(|(t, f)| t.initial.total() != f.total())
        .count();
    let checks = vec![CheckReport::new("mass_conservation", trajs.len(), lost as f64, 0.0)];
    let result = serde_json::to_value(SepResult {
        replicas: trajs.len(),
        horizon,
        density: config.density,
        particles: trajs.iter().map(|t| t.initial.total()).collect(),
        events: trajs.iter().map(|t| t.events.len()).collect(),
        final_configs: finals,
    })?;
    Ok(RunReport::new(
        config,
        vec![env.content_hash()],
        checks,
        result,
        sep_trajectories_to_csv(&trajs),
    ))
}

#[derive(Serialize)]
struct HomogResult {
    estimate: SigmaEstimate,
    min_eigenvalue: f64,
    oracle: Option<f64>,
    oracle_relative_error: Option<f64>,
}

fn run_homog(config: &ExperimentConfig) -> Result<RunReport> {
    let env = sample_env(config)?;
    let est = estimate_sigma_msd_env(
        &env,
        config.sigma_method,
        config.horizon(),
        config.replicas,
        config.seed,
        MsdOptions::default(),
    )?;
    let mut checks = vec![CheckReport::new(
        "sigma_positive_definite",
        1,
        if est.check_invariants().is_ok() { 0.0 } else { 1.0 },
        0.0,
    )];
    let oracle = if env.dim() == 1 {
        sigma_oracle_1d(config.law()).ok()
    } else {
        None
    };
    if let Some(o) = oracle {
        let z = crate::stats::standardized(est.sigma[0][0], o, est.stderr[0][0]).abs();
        checks.push(CheckReport::new("oracle_agreement", 1, z, 4.0));
    }
    if let Some(tc) = &est.time_change {
        checks.push(CheckReport::new(
            "time_change_consistency",
            1,
            tc.max_standardized_gap,
            3.0,
        ));
    }
    let mut csv = String::from("i,j,sigma,stderr\n");
    for i in 0..est.dim() {
        for j in 0..est.dim() {
            let _ = writeln!(csv, "{i},{j},{},{}", est.sigma[i][j], est.stderr[i][j]);
        }
    }
    let result = serde_json::to_value(HomogResult {
        min_eigenvalue: est.min_eigenvalue(),
        oracle_relative_error: oracle.map(|o| (est.sigma[0][0] - o).abs() / o),
        oracle,
        estimate: est,
    })?;
    Ok(RunReport::new(config, vec![env.content_hash()], checks, result, csv))
}

/// `G(u) = prod_k (1 + cos 2 pi (u_k - 1/4)) / 2`: one full period, peaked
/// where the sine profile is largest.
pub fn default_hdl_test_function(dim: usize) -> TestFunction {
    TestFunction::cosine_bump(vec![0.25; dim], 0.5, 1.0)
}

fn hdl_sigma(config: &ExperimentConfig, dim: usize) -> Result<(Vec<Vec<f64>>, String)> {
    let law = config.law();
    if law.kind == LawKind::Constant {
        let m = law.mean();
        let sigma = (0..dim)
            .map(|i| (0..dim).map(|j| if i == j { 2.0 * m } else { 0.0 }).collect())
            .collect();
        return Ok((sigma, "constant_law".into()));
    }
    if dim == 1 {
        return Ok((vec![vec![sigma_oracle_1d(law)?]], "sigma_oracle_1d".into()));
    }
    Err(SepError::Unsupported(
        "hdl in d >= 2 needs a constant law; no closed-form Sigma otherwise".into(),
    ))
}

fn run_hdl(config: &ExperimentConfig) -> Result<RunReport> {
    let dim = config.dims.as_ref().map_or(1, |d| d.len());
    let (sigma, sigma_source) = hdl_sigma(config, dim)?;
    let params = HdlParams {
        law: config.law().clone(),
        dim,
        n_grid: config.n_grid.clone().expect("validated"),
        rho_bar: MacroscopicProfile::half_sine(),
        g_list: vec![default_hdl_test_function(dim)],
        t_grid: config.t_grid.clone().expect("validated"),
        sigma,
        sigma_source,
        environments: config.environments,
        replicas: config.replicas,
        seed: config.seed,
        event_cap: config.event_cap,
    };
    let report = hdl_experiment(&params)?;
    let checks = vec![
        CheckReport::new(
            "err_non_increasing",
            report.scales.len(),
            if report.monotone_within_noise() { 0.0 } else { 1.0 },
            0.0,
        ),
        CheckReport::new(
            "err_at_largest_n",
            1,
            report.scales.last().map_or(f64::INFINITY, |s| s.err),
            report.threshold(),
        ),
    ];
    let hashes = report.env_hashes.iter().flatten().cloned().collect();
    let csv = report.to_csv();
    Ok(RunReport::new(
        config,
        hashes,
        checks,
        serde_json::to_value(&report)?,
        csv,
    ))
}

/// Exact-arithmetic and Monte Carlo checks on one sampled environment:
/// duality, multi-particle duality, binomial reversibility, semigroup
/// detailed balance and Chapman-Kolmogorov, ladder equivalence.
pub fn check_all(env: &Environment, density: f64, replicas: usize, seed: u64) -> Result<Vec<CheckReport>> {
    let mut checks = Vec::new();

    let mut dual = DualityReport::empty();
    for i in 0..200u64 {
        let mut rng = rng_from_seed(seed_schedule(seed, TaskKind::Check, 0, i));
        let cfg = ParticleConfig::uniform_random(env, &mut rng);
        let x = rng.random_range(0..env.size());
        dual = dual.merge(duality_check(env, &cfg, x)?);
    }
    checks.push(CheckReport::new("duality", dual.cases, dual.max_abs_residual, 1e-12));

    let mut multi = DualityReport::empty();
    for i in 0..50u64 {
        let mut rng = rng_from_seed(seed_schedule(seed, TaskKind::Check, 1, i));
        let eta = ParticleConfig::uniform_random(env, &mut rng);
        let mut xi = vec![0u32; env.size()];
        let k = rng.random_range(1..=3);
        for _ in 0..k {
            let x = rng.random_range(0..env.size());
            if xi[x] < env.at(x) {
                xi[x] += 1;
            }
        }
        let xi = ParticleConfig::new(env, xi)?;
        multi = multi.merge(multi_duality_check(env, &xi, &eta)?);
    }
    checks.push(CheckReport::new(
        "multi_duality",
        multi.cases,
        multi.max_abs_residual,
        1e-12,
    ));

    checks.push(reversibility_check(env, density, 10_000, seed)?.check_report());

    if env.size() <= DENSE_LIMIT {
        let gen = GeneratorMatrix::new(env, crate::walk::WalkKind::AlphaWalk);
        let (mut db, mut ck) = (0.0f64, 0.0f64);
        for t in [0.5, 1.0, 2.0] {
            let p = semigroup(&gen, t, 1e-14)?;
            let p2 = semigroup(&gen, 2.0 * t, 1e-14)?;
            db = db.max(p.max_reversibility_violation(env));
            ck = ck.max(p.chapman_kolmogorov_error(&p, &p2));
        }
        checks.push(CheckReport::new("detailed_balance", 3, db, 1e-8));
        checks.push(CheckReport::new("chapman_kolmogorov", 3, ck, 1e-8));
    }

    let cfg0 = binomial_measure_sampler(env, density, seed_schedule(seed, TaskKind::Sampler, 1, 0))?;
    checks.push(ladder_direct_comparison(env, &cfg0, 1.0, replicas, seed)?.check_report());
    Ok(checks)
}

fn run_check_all(config: &ExperimentConfig) -> Result<RunReport> {
    let env = sample_env(config)?;
    let checks = check_all(&env, config.density, config.replicas, config.seed)?;
    let mut csv = String::from("check,cases,max_residual,pass\n");
    for c in &checks {
        let _ = writeln!(csv, "{},{},{:e},{}", c.name, c.cases, c.max_residual, c.pass);
    }
    Ok(RunReport::new(
        config,
        vec![env.content_hash()],
        checks,
        Value::Null,
        csv,
    ))
}
