use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::environment::Environment;
use crate::error::{invalid, Result, SepError};
use crate::rng::rng_from_seed;

/// Occupation numbers `eta(x)` in `0..=alpha_x`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParticleConfig {
    eta: Vec<u32>,
}

impl ParticleConfig {
    pub fn new(env: &Environment, eta: Vec<u32>) -> Result<Self> {
        let cfg = ParticleConfig { eta };
        cfg.validate(env)?;
        Ok(cfg)
    }

    pub fn empty(env: &Environment) -> Self {
        ParticleConfig {
            eta: vec![0; env.size()],
        }
    }

    pub fn full(env: &Environment) -> Self {
        ParticleConfig {
            eta: env.alpha().to_vec(),
        }
    }

    /// Uniformly random occupancies, independent over sites.
    pub fn uniform_random<R: Rng + ?Sized>(env: &Environment, rng: &mut R) -> Self {
        ParticleConfig {
            eta: env.alpha().iter().map(|&a| rng.random_range(0..=a)).collect(),
        }
    }

    pub fn validate(&self, env: &Environment) -> Result<()> {
        if self.eta.len() != env.size() {
            return Err(SepError::InvalidConfig(format!(
                "configuration has {} sites, environment {}",
                self.eta.len(),
                env.size()
            )));
        }
        if let Some(x) = (0..self.eta.len()).find(|&x| self.eta[x] > env.at(x)) {
            return Err(SepError::InvalidConfig(format!(
                "eta({x}) = {} exceeds alpha = {}",
                self.eta[x],
                env.at(x)
            )));
        }
        Ok(())
    }

    pub fn eta(&self) -> &[u32] {
        &self.eta
    }
    #[inline]
    pub fn at(&self, x: usize) -> u32 {
        self.eta[x]
    }
    pub fn len(&self) -> usize {
        self.eta.len()
    }
    pub fn is_empty(&self) -> bool {
        self.eta.is_empty()
    }
    pub fn total(&self) -> u64 {
        self.eta.iter().map(|&v| v as u64).sum()
    }

    /// `eta(x) / alpha_x` for every site.
    pub fn ratios(&self, env: &Environment) -> Vec<f64> {
        self.eta
            .iter()
            .zip(env.alpha())
            .map(|(&e, &a)| e as f64 / a as f64)
            .collect()
    }

    /// Moves a particle `x -> y` if allowed; returns whether it moved.
    #[inline]
    pub(crate) fn try_move(&mut self, env: &Environment, x: usize, y: usize) -> bool {
        if self.eta[x] >= 1 && self.eta[y] < env.at(y) {
            self.eta[x] -= 1;
            self.eta[y] += 1;
            true
        } else {
            false
        }
    }

    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        for &v in &self.eta {
            h.update(v.to_le_bytes());
        }
        h.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(env: &Environment, s: &str) -> Result<Self> {
        let cfg: ParticleConfig = serde_json::from_str(s)?;
        cfg.validate(env)?;
        Ok(cfg)
    }
}

/// `eta^{x,y}`: one particle moved from `x` to `y` when `eta(x) >= 1` and
/// `eta(y) < alpha_y`, otherwise `eta` itself.
pub fn apply_move(env: &Environment, cfg: &ParticleConfig, x: usize, y: usize) -> Result<ParticleConfig> {
    env.torus().check_site(x)?;
    env.torus().check_site(y)?;
    if !env.torus().are_neighbours(x, y) {
        return Err(SepError::NotNeighbours { x, y });
    }
    let mut out = cfg.clone();
    out.try_move(env, x, y);
    Ok(out)
}

/// Bond rate `eta(x) (alpha_y - eta(y))` of the move `x -> y`.
#[inline]
pub fn move_rate(env: &Environment, eta: &[u32], x: usize, y: usize) -> u64 {
    eta[x] as u64 * (env.at(y) - eta[y]) as u64
}

/// Independent `Binomial(alpha_x, p(x))` occupancies.
pub fn sample_binomial_with<F: Fn(usize) -> f64>(env: &Environment, p: F, seed: u64) -> Result<ParticleConfig> {
    let mut rng = rng_from_seed(seed);
    let mut eta = Vec::with_capacity(env.size());
    for x in 0..env.size() {
        let px = p(x);
        if !(0.0..=1.0).contains(&px) {
            return Err(invalid("p", format!("{px} at site {x} is outside [0, 1]")));
        }
        eta.push((0..env.at(x)).filter(|_| rng.random::<f64>() < px).count() as u32);
    }
    Ok(ParticleConfig { eta })
}

/// Product of `Binomial(alpha_x, p)`.
pub fn binomial_measure_sampler(env: &Environment, p: f64, seed: u64) -> Result<ParticleConfig> {
    sample_binomial_with(env, |_| p, seed)
}

/// Binary lift: ladder site `(x, i)` for `i` in `0..alpha_x`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LadderConfig {
    offsets: Vec<usize>,
    bits: Vec<bool>,
}

impl LadderConfig {
    /// Fill each ladder from the bottom with `eta(x)` particles.
    pub fn from_particles(env: &Environment, cfg: &ParticleConfig) -> Self {
        let mut offsets = Vec::with_capacity(env.size() + 1);
        let mut bits = Vec::with_capacity(env.total_alpha() as usize);
        offsets.push(0);
        for x in 0..env.size() {
            for i in 0..env.at(x) {
                bits.push(i < cfg.at(x));
            }
            offsets.push(bits.len());
        }
        LadderConfig { offsets, bits }
    }

    pub fn from_bits(env: &Environment, bits: Vec<bool>) -> Result<Self> {
        let mut offsets = Vec::with_capacity(env.size() + 1);
        offsets.push(0);
        for x in 0..env.size() {
            offsets.push(offsets[x] + env.at(x) as usize);
        }
        if bits.len() != offsets[env.size()] {
            return Err(SepError::InvalidConfig(format!(
                "ladder has {} levels, environment needs {}",
                bits.len(),
                offsets[env.size()]
            )));
        }
        Ok(LadderConfig { offsets, bits })
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn level(&self, x: usize, i: usize) -> bool {
        self.bits[self.offsets[x] + i]
    }

    #[inline]
    pub(crate) fn swap(&mut self, x: usize, i: usize, y: usize, j: usize) {
        self.bits.swap(self.offsets[x] + i, self.offsets[y] + j);
    }

    /// `eta(x) = sum_i bits(x, i)`.
    pub fn project(&self) -> ParticleConfig {
        ParticleConfig {
            eta: self
                .offsets
                .windows(2)
                .map(|w| self.bits[w[0]..w[1]].iter().filter(|&&b| b).count() as u32)
                .collect(),
        }
    }
}

/// Site-level SEP path: initial configuration and `(time, from, to)` moves.
#[derive(Debug, Clone, PartialEq)]
pub struct SepTrajectory {
    pub initial: ParticleConfig,
    pub events: Vec<(f64, usize, usize)>,
    pub horizon: f64,
}

impl SepTrajectory {
    /// Replays every event, checking times, adjacency and occupancy bounds.
    pub fn replay(&self, env: &Environment) -> Result<ParticleConfig> {
        self.initial.validate(env)?;
        let mut cfg = self.initial.clone();
        let mut prev = 0.0;
        for (i, &(t, x, y)) in self.events.iter().enumerate() {
            if !(t > prev) || t > self.horizon {
                return Err(SepError::NonMonotoneTimes(i));
            }
            if !env.torus().are_neighbours(x, y) {
                return Err(SepError::NotNeighbours { x, y });
            }
            if !cfg.try_move(env, x, y) {
                return Err(SepError::InvalidConfig(format!("event {i} moves {x} -> {y} illegally")));
            }
            prev = t;
        }
        Ok(cfg)
    }

    /// Configuration at time `t`.
    pub fn config_at(&self, env: &Environment, t: f64) -> ParticleConfig {
        let mut cfg = self.initial.clone();
        for &(s, x, y) in &self.events {
            if s > t {
                break;
            }
            cfg.try_move(env, x, y);
        }
        cfg
    }
}

/// CSV with columns `replica,time,from_site,to_site`.
pub fn sep_trajectories_to_csv(trajs: &[SepTrajectory]) -> String {
    let mut out = String::from("replica,time,from_site,to_site\n");
    for (r, tr) in trajs.iter().enumerate() {
        for &(t, x, y) in &tr.events {
            let _ = writeln!(out, "{r},{t},{x},{y}");
        }
    }
    out
}
