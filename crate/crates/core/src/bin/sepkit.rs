use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sepkit::harness::{exit_code, run, Command, ConfigFile, ExperimentConfig, OutputFormat, EXIT_CONFIG};
use sepkit::homogenization::SigmaMethod;
use sepkit::{Result, WalkKind};

#[derive(Parser)]
#[command(name = "sepkit", version, about = "Partial exclusion in a random environment")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Sample an environment.
    Env(Common),
    /// Simulate single random walks.
    Walk(Common),
    /// Simulate SEP(alpha) from a binomial start.
    Sep(Common),
    /// Estimate the effective diffusion matrix.
    Homog(Common),
    /// Run the hydrodynamic-limit experiment.
    Hdl(Common),
    /// Run the exact and Monte Carlo consistency suites.
    CheckAll(Common),
}

#[derive(Args, Clone)]
struct Common {
    /// TOML config file; flags given here override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    /// Output path; `.json` and `.csv` extensions are substituted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = parse_format)]
    format: Option<OutputFormat>,
    /// Environment law, e.g. `iid:1,2` or `const:2`.
    #[arg(long)]
    law: Option<String>,
    /// Torus side lengths, comma separated.
    #[arg(long, value_delimiter = ',')]
    dims: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    n_grid: Option<Vec<usize>>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    t_grid: Option<Vec<f64>>,
    #[arg(long)]
    replicas: Option<usize>,
    #[arg(long)]
    environments: Option<usize>,
    #[arg(long)]
    start: Option<usize>,
    #[arg(long, value_parser = parse_walk_kind)]
    walk_kind: Option<WalkKind>,
    #[arg(long)]
    density: Option<f64>,
    #[arg(long, value_parser = parse_sigma_method)]
    sigma_method: Option<SigmaMethod>,
    #[arg(long)]
    event_cap: Option<f64>,
}

fn parse_format(s: &str) -> std::result::Result<OutputFormat, String> {
    s.parse().map_err(|e: sepkit::SepError| e.to_string())
}

fn parse_walk_kind(s: &str) -> std::result::Result<WalkKind, String> {
    match s {
        "alpha" | "alpha_walk" => Ok(WalkKind::AlphaWalk),
        "omega" | "omega_walk" => Ok(WalkKind::OmegaWalk),
        _ => Err(format!("unknown walk kind `{s}` (alpha_walk, omega_walk)")),
    }
}

fn parse_sigma_method(s: &str) -> std::result::Result<SigmaMethod, String> {
    match s {
        "msd_alpha_walk" => Ok(SigmaMethod::MsdAlphaWalk),
        "msd_omega_walk_timechange" => Ok(SigmaMethod::MsdOmegaWalkTimechange),
        _ => Err(format!(
            "unknown method `{s}` (msd_alpha_walk, msd_omega_walk_timechange)"
        )),
    }
}

fn resolve(command: Command, c: Common) -> Result<ExperimentConfig> {
    let base = match &c.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    if base.command.is_some_and(|k| k != command) {
        eprintln!("note: config file command overridden by `{command}`");
    }
    let cli = ConfigFile {
        command: Some(command),
        law: c.law,
        dims: c.dims,
        n_grid: c.n_grid,
        horizon: c.horizon,
        t_grid: c.t_grid,
        replicas: c.replicas,
        environments: c.environments,
        seed: c.seed,
        threads: c.threads,
        out: c.out,
        format: c.format,
        start: c.start,
        walk_kind: c.walk_kind,
        density: c.density,
        sigma_method: c.sigma_method,
        event_cap: c.event_cap,
    };
    ExperimentConfig::resolve(base.merge(cli))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, common) = match cli.command {
        Sub::Env(c) => (Command::Env, c),
        Sub::Walk(c) => (Command::Walk, c),
        Sub::Sep(c) => (Command::Sep, c),
        Sub::Homog(c) => (Command::Homog, c),
        Sub::Hdl(c) => (Command::Hdl, c),
        Sub::CheckAll(c) => (Command::CheckAll, c),
    };
    let config = match resolve(command, common) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    let report = match run(&config) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e) as u8);
        }
    };
    for c in &report.checks {
        eprintln!(
            "{:<28} {:>8} cases  max {:<12.4e} {}",
            c.name,
            c.cases,
            c.max_residual,
            if c.pass { "PASS" } else { "FAIL" }
        );
    }
    let written = match &config.out {
        Some(out) => report.write(out),
        None => {
            let text = if config.format.json() {
                report.to_json()
            } else {
                Ok(report.csv.clone())
            };
            text.map(|t| {
                print!("{t}");
                Vec::new()
            })
        }
    };
    match written {
        Ok(paths) => {
            for p in paths {
                eprintln!("wrote {}", p.display());
            }
            ExitCode::from(report.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
