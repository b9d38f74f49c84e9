use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::environment::EnvLaw;
use crate::error::{Result, SepError};
use crate::homogenization::SigmaMethod;
use crate::walk::WalkKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Env,
    Walk,
    Sep,
    Homog,
    Hdl,
    CheckAll,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Env => "env",
            Command::Walk => "walk",
            Command::Sep => "sep",
            Command::Homog => "homog",
            Command::Hdl => "hdl",
            Command::CheckAll => "check-all",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
    Both,
}

impl OutputFormat {
    pub fn json(self) -> bool {
        self != OutputFormat::Csv
    }
    pub fn csv(self) -> bool {
        self != OutputFormat::Json
    }
}

impl FromStr for OutputFormat {
    type Err = SepError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            "both" => Ok(OutputFormat::Both),
            _ => Err(SepError::InvalidConfig(format!(
                "format: expected json, csv or both, got `{s}`"
            ))),
        }
    }
}

/// Keys accepted in a config file. Every key is optional at parse time;
/// each command checks for the keys it needs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub command: Option<Command>,
    pub law: Option<String>,
    pub dims: Option<Vec<usize>>,
    pub n_grid: Option<Vec<usize>>,
    pub horizon: Option<f64>,
    pub t_grid: Option<Vec<f64>>,
    pub replicas: Option<usize>,
    pub environments: Option<usize>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub format: Option<OutputFormat>,
    /// Starting site of walks.
    pub start: Option<usize>,
    pub walk_kind: Option<WalkKind>,
    /// Bernoulli/Binomial density of SEP initial configurations.
    pub density: Option<f64>,
    pub sigma_method: Option<SigmaMethod>,
    pub event_cap: Option<f64>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| SepError::InvalidConfig(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| SepError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            SepError::InvalidConfig(m) => SepError::InvalidConfig(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    /// Keys set in `over` replace those in `self`.
    pub fn merge(self, over: ConfigFile) -> ConfigFile {
        macro_rules! pick {
            ($($f:ident),*) => { ConfigFile { $($f: over.$f.or(self.$f)),* } };
        }
        pick!(
            command,
            law,
            dims,
            n_grid,
            horizon,
            t_grid,
            replicas,
            environments,
            seed,
            threads,
            out,
            format,
            start,
            walk_kind,
            density,
            sigma_method,
            event_cap
        )
    }
}

/// A fully resolved run description. Serialized into every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub command: Command,
    pub law: Option<EnvLaw>,
    pub law_spec: Option<String>,
    pub dims: Option<Vec<usize>>,
    pub n_grid: Option<Vec<usize>>,
    pub horizon: Option<f64>,
    pub t_grid: Option<Vec<f64>>,
    pub replicas: usize,
    pub environments: usize,
    pub seed: u64,
    pub threads: usize,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
    pub start: usize,
    pub walk_kind: WalkKind,
    pub density: f64,
    pub sigma_method: SigmaMethod,
    pub event_cap: f64,
}

fn required<T: Clone>(v: &Option<T>, name: &str) -> Result<T> {
    v.clone().ok_or_else(|| SepError::MissingField(name.into()))
}

impl ExperimentConfig {
    /// Applies defaults and checks the keys the command needs.
    pub fn resolve(file: ConfigFile) -> Result<Self> {
        let command = required(&file.command, "command")?;
        let law = file.law.as_deref().map(EnvLaw::from_str).transpose()?;
        let cfg = ExperimentConfig {
            command,
            law,
            law_spec: file.law.clone(),
            dims: file.dims.clone(),
            n_grid: file.n_grid.clone(),
            horizon: file.horizon,
            t_grid: file.t_grid.clone(),
            replicas: file.replicas.unwrap_or(match command {
                Command::Homog => 10_000,
                Command::CheckAll => 2_000,
                Command::Hdl => 20,
                _ => 1,
            }),
            environments: file.environments.unwrap_or(1),
            seed: file.seed.unwrap_or(0),
            threads: file.threads.unwrap_or(1),
            out: file.out.clone(),
            format: file.format.unwrap_or_default(),
            start: file.start.unwrap_or(0),
            walk_kind: file.walk_kind.unwrap_or(WalkKind::AlphaWalk),
            density: file.density.unwrap_or(0.5),
            sigma_method: file.sigma_method.unwrap_or(SigmaMethod::MsdAlphaWalk),
            event_cap: file.event_cap.unwrap_or(1e10),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(SepError::InvalidConfig(m.into()));
        if self.threads == 0 {
            return bad("threads: must be positive");
        }
        if self.replicas == 0 {
            return bad("replicas: must be positive");
        }
        if self.environments == 0 {
            return bad("environments: must be positive");
        }
        if !(0.0..=1.0).contains(&self.density) {
            return bad("density: must lie in [0, 1]");
        }
        required(&self.law, "law")?;
        match self.command {
            Command::Env | Command::CheckAll => {
                required(&self.dims, "dims")?;
            }
            Command::Walk | Command::Sep | Command::Homog => {
                required(&self.dims, "dims")?;
                let h = required(&self.horizon, "horizon")?;
                if !(h > 0.0 && h.is_finite()) {
                    return bad("horizon: must be positive and finite");
                }
            }
            Command::Hdl => {
                required(&self.n_grid, "n_grid")?;
                let t = required(&self.t_grid, "t_grid")?;
                if t.iter().any(|&t| !(t >= 0.0 && t.is_finite())) {
                    return bad("t_grid: times must be finite and non-negative");
                }
            }
        }
        Ok(())
    }

    pub fn law(&self) -> &EnvLaw {
        self.law.as_ref().expect("validated")
    }

    pub fn dims(&self) -> &[usize] {
        self.dims.as_deref().expect("validated")
    }

    pub fn horizon(&self) -> f64 {
        self.horizon.expect("validated")
    }
}
