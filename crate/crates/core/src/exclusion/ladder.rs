//! Stirring construction on the ladder lift.
//!
//! Every pair of levels `(x, i), (y, j)` across a bond carries a rate-1
//! clock, so the superposed clock of bond `{x, y}` rings at rate
//! `alpha_x * alpha_y` and picks the two levels uniformly. A ring exchanges
//! the two bits; it changes the projection only when they differ.

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use super::config::{LadderConfig, ParticleConfig, SepTrajectory};
use crate::environment::Environment;
use crate::error::{invalid, Result};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone)]
pub struct LadderSep<'a> {
    env: &'a Environment,
    ladder: LadderConfig,
    bonds: Vec<(usize, usize)>,
    cumulative: Vec<u64>,
}

impl<'a> LadderSep<'a> {
    pub fn new(env: &'a Environment, ladder: LadderConfig) -> Result<Self> {
        let fresh = LadderConfig::from_bits(env, ladder.bits().to_vec())?;
        let t = env.torus();
        let mut bonds = Vec::with_capacity(t.size() * t.dim());
        let mut cumulative = Vec::with_capacity(t.size() * t.dim());
        let mut acc = 0u64;
        for x in 0..t.size() {
            for k in 0..t.dim() {
                let y = t.neighbour(x, 2 * k);
                acc += env.at(x) as u64 * env.at(y) as u64;
                bonds.push((x, y));
                cumulative.push(acc);
            }
        }
        Ok(LadderSep {
            env,
            ladder: fresh,
            bonds,
            cumulative,
        })
    }

    pub fn ladder(&self) -> &LadderConfig {
        &self.ladder
    }

    pub fn total_rate(&self) -> u64 {
        *self.cumulative.last().unwrap_or(&0)
    }

    /// Run for `duration`; `on_event(time, from, to)` fires for each ring
    /// that moves a particle between sites.
    pub fn advance<R: Rng + ?Sized, F: FnMut(f64, usize, usize)>(
        &mut self,
        duration: f64,
        rng: &mut R,
        mut on_event: F,
    ) {
        let total = self.total_rate();
        if total == 0 {
            return;
        }
        let mut t = 0.0;
        loop {
            let e: f64 = Exp1.sample(rng);
            t += e / total as f64;
            if t > duration {
                return;
            }
            let u = rng.random_range(0..total);
            let b = self.cumulative.partition_point(|&c| c <= u);
            let (x, y) = self.bonds[b];
            let i = rng.random_range(0..self.env.at(x)) as usize;
            let j = rng.random_range(0..self.env.at(y)) as usize;
            let (bx, by) = (self.ladder.level(x, i), self.ladder.level(y, j));
            if bx != by {
                self.ladder.swap(x, i, y, j);
                if bx {
                    on_event(t, x, y);
                } else {
                    on_event(t, y, x);
                }
            }
        }
    }
}

pub fn simulate_sep_ladder(
    env: &Environment,
    ladder0: &LadderConfig,
    horizon: f64,
    seed: u64,
) -> Result<SepTrajectory> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(invalid("horizon", "must be positive and finite"));
    }
    let mut sep = LadderSep::new(env, ladder0.clone())?;
    let mut rng = rng_from_seed(seed);
    let mut events = Vec::new();
    sep.advance(horizon, &mut rng, |t, x, y| events.push((t, x, y)));
    Ok(SepTrajectory {
        initial: ladder0.project(),
        events,
        horizon,
    })
}

/// Initial ladder for a site configuration, filled bottom to top.
pub fn lift(env: &Environment, cfg: &ParticleConfig) -> Result<LadderConfig> {
    cfg.validate(env)?;
    Ok(LadderConfig::from_particles(env, cfg))
}
