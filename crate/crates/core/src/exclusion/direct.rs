//! Rejection-free kinetic Monte Carlo over directed bonds.

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use super::config::{move_rate, ParticleConfig, SepTrajectory};
use crate::environment::Environment;
use crate::error::{invalid, Result};
use crate::rng::rng_from_seed;

/// Complete binary tree of integer rates with `O(log n)` update and search.
#[derive(Debug, Clone)]
pub struct SumTree {
    leaves: usize,
    nodes: Vec<u64>,
}

impl SumTree {
    pub fn new(values: &[u64]) -> Self {
        let leaves = values.len().next_power_of_two().max(1);
        let mut nodes = vec![0u64; 2 * leaves];
        nodes[leaves..leaves + values.len()].copy_from_slice(values);
        for i in (1..leaves).rev() {
            nodes[i] = nodes[2 * i] + nodes[2 * i + 1];
        }
        SumTree { leaves, nodes }
    }

    #[inline]
    pub fn total(&self) -> u64 {
        self.nodes[1]
    }

    #[inline]
    pub fn get(&self, i: usize) -> u64 {
        self.nodes[self.leaves + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, v: u64) {
        let mut k = self.leaves + i;
        let delta = v.wrapping_sub(self.nodes[k]);
        if delta == 0 {
            return;
        }
        let nodes = &mut self.nodes[..2 * self.leaves];
        while k >= 1 {
            nodes[k] = nodes[k].wrapping_add(delta);
            k /= 2;
        }
    }

    /// Leaf whose cumulative interval contains `u < total`.
    #[inline]
    pub fn find(&self, mut u: u64) -> usize {
        let mut k = 1;
        while k < self.leaves {
            let l = self.nodes[2 * k];
            let right = (u >= l) as usize;
            u -= l * right as u64;
            k = 2 * k + right;
        }
        k - self.leaves
    }
}

/// SEP(alpha) state with per-bond rates `eta(x)(alpha_y - eta(y))`.
#[derive(Debug, Clone)]
pub struct DirectSep<'a> {
    env: &'a Environment,
    cfg: ParticleConfig,
    tree: SumTree,
    degree: usize,
}

impl<'a> DirectSep<'a> {
    pub fn new(env: &'a Environment, cfg: ParticleConfig) -> Result<Self> {
        cfg.validate(env)?;
        let t = env.torus();
        let degree = t.degree();
        let rates: Vec<u64> = (0..t.size())
            .flat_map(|x| t.neighbours(x).iter().map(move |&y| (x, y)))
            .map(|(x, y)| move_rate(env, cfg.eta(), x, y))
            .collect();
        Ok(DirectSep {
            env,
            cfg,
            tree: SumTree::new(&rates),
            degree,
        })
    }

    pub fn config(&self) -> &ParticleConfig {
        &self.cfg
    }

    pub fn into_config(self) -> ParticleConfig {
        self.cfg
    }

    pub fn total_rate(&self) -> u64 {
        self.tree.total()
    }

    /// Waiting time and move of the next event, not yet applied.
    #[inline]
    pub fn propose<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<(f64, usize, usize)> {
        let total = self.tree.total();
        if total == 0 {
            return None;
        }
        let e: f64 = Exp1.sample(rng);
        let leaf = self.tree.find(rng.random_range(0..total));
        let x = leaf / self.degree;
        let y = self.env.torus().neighbour(x, leaf % self.degree);
        Some((e / total as f64, x, y))
    }

    /// Apply an allowed move and refresh the rates of affected bonds.
    #[inline]
    pub fn apply(&mut self, x: usize, y: usize) {
        let moved = self.cfg.try_move(self.env, x, y);
        debug_assert!(moved);
        self.refresh(x);
        self.refresh(y);
    }

    fn refresh(&mut self, x: usize) {
        let t = self.env.torus();
        let eta = self.cfg.eta();
        for (slot, &y) in t.neighbours(x).iter().enumerate() {
            self.tree.set(x * self.degree + slot, move_rate(self.env, eta, x, y));
            let back = crate::lattice::Torus::reverse_slot(slot);
            self.tree.set(y * self.degree + back, move_rate(self.env, eta, y, x));
        }
    }

    /// Run for `duration`, calling `on_event(time_offset, x, y)` after each
    /// move. The event overshooting the window is discarded.
    pub fn advance<R: Rng + ?Sized, F: FnMut(f64, usize, usize)>(
        &mut self,
        duration: f64,
        rng: &mut R,
        mut on_event: F,
    ) {
        let mut t = 0.0;
        while let Some((dt, x, y)) = self.propose(rng) {
            t += dt;
            if t > duration {
                break;
            }
            self.apply(x, y);
            on_event(t, x, y);
        }
    }
}

pub fn simulate_sep_direct(env: &Environment, cfg0: &ParticleConfig, horizon: f64, seed: u64) -> Result<SepTrajectory> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(invalid("horizon", "must be positive and finite"));
    }
    let mut sep = DirectSep::new(env, cfg0.clone())?;
    let mut rng = rng_from_seed(seed);
    let mut events = Vec::new();
    sep.advance(horizon, &mut rng, |t, x, y| events.push((t, x, y)));
    Ok(SepTrajectory {
        initial: cfg0.clone(),
        events,
        horizon,
    })
}
