//! The walks RW(alpha) and RW(omega): rates, Gillespie paths, time change.
//!
//! RW(alpha) jumps `x -> y` at rate `alpha_y`; RW(omega) at rate
//! `alpha_x * alpha_y`. Both choose the target with probability
//! `alpha_y / sum_z alpha_z` and differ only in the holding rate.

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::environment::Environment;
use crate::error::{Result, SepError};
use crate::lattice::Torus;
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WalkKind {
    AlphaWalk,
    OmegaWalk,
}

/// `lambda^alpha_x = sum over neighbours of alpha_y`.
pub fn holding_rate(env: &Environment, x: usize) -> f64 {
    alpha_rate_int(env, x) as f64
}

/// `lambda^omega_x = alpha_x * lambda^alpha_x`.
pub fn omega_holding_rate(env: &Environment, x: usize) -> f64 {
    (env.at(x) as u64 * alpha_rate_int(env, x)) as f64
}

fn alpha_rate_int(env: &Environment, x: usize) -> u64 {
    env.torus().neighbours(x).iter().map(|&y| env.at(y) as u64).sum()
}

/// Jump probabilities over the neighbour slots of `x`.
pub fn jump_distribution(env: &Environment, x: usize) -> Vec<f64> {
    let total = alpha_rate_int(env, x) as f64;
    env.torus()
        .neighbours(x)
        .iter()
        .map(|&y| env.at(y) as f64 / total)
        .collect()
}

/// Precomputed per-site rates for fast stepping.
#[derive(Debug, Clone)]
pub struct WalkTables {
    torus: Torus,
    kind: WalkKind,
    alpha: Vec<u32>,
    weights: Vec<u32>,
    totals: Vec<u32>,
    rates: Vec<f64>,
}

impl WalkTables {
    pub fn new(env: &Environment, kind: WalkKind) -> Self {
        let t = env.torus().clone();
        let n = t.size();
        let mut weights = Vec::with_capacity(n * t.degree());
        let mut totals = Vec::with_capacity(n);
        let mut rates = Vec::with_capacity(n);
        for x in 0..n {
            let mut s = 0u32;
            for &y in t.neighbours(x) {
                weights.push(env.at(y));
                s += env.at(y);
            }
            totals.push(s);
            rates.push(match kind {
                WalkKind::AlphaWalk => s as f64,
                WalkKind::OmegaWalk => s as f64 * env.at(x) as f64,
            });
        }
        WalkTables {
            torus: t,
            kind,
            alpha: env.alpha().to_vec(),
            weights,
            totals,
            rates,
        }
    }

    pub fn torus(&self) -> &Torus {
        &self.torus
    }
    pub fn kind(&self) -> WalkKind {
        self.kind
    }
    #[inline]
    pub fn holding_rate(&self, x: usize) -> f64 {
        self.rates[x]
    }
    #[inline]
    pub fn alpha(&self, x: usize) -> u32 {
        self.alpha[x]
    }

    /// Draw a holding time at `x` and the slot of the next jump.
    #[inline]
    pub fn step<R: Rng + ?Sized>(&self, x: usize, rng: &mut R) -> (f64, usize) {
        let e: f64 = Exp1.sample(rng);
        (e / self.rates[x], self.pick_slot(x, rng))
    }

    #[inline]
    fn pick_slot<R: Rng + ?Sized>(&self, x: usize, rng: &mut R) -> usize {
        let deg = self.torus.degree();
        let w = &self.weights[x * deg..(x + 1) * deg];
        let mut u = rng.random_range(0..self.totals[x]);
        for (slot, &wi) in w.iter().enumerate() {
            if u < wi {
                return slot;
            }
            u -= wi;
        }
        deg - 1
    }

    /// Run from `x0` and record the unwrapped displacement at each time of
    /// the increasing `grid` into `disp` (`grid.len() * d`, row per time).
    /// If `clock` is given it receives `int_0^t alpha_{X_s} ds` per grid time.
    /// Returns the final site.
    pub fn observe_on_grid<R: Rng + ?Sized>(
        &self,
        x0: usize,
        grid: &[f64],
        rng: &mut R,
        disp: &mut [i64],
        mut clock: Option<&mut [f64]>,
    ) -> usize {
        let d = self.torus.dim();
        let mut pos = vec![0i64; d];
        let mut x = x0;
        let mut t = 0.0;
        let mut acc = 0.0;
        let mut k = 0;
        while k < grid.len() {
            let (dt, slot) = self.step(x, rng);
            let next = t + dt;
            while k < grid.len() && grid[k] < next {
                disp[k * d..(k + 1) * d].copy_from_slice(&pos);
                if let Some(c) = clock.as_deref_mut() {
                    c[k] = acc + self.alpha[x] as f64 * (grid[k] - t);
                }
                k += 1;
            }
            acc += self.alpha[x] as f64 * dt;
            t = next;
            let (axis, sign) = Torus::slot_axis(slot);
            pos[axis] += sign;
            x = self.torus.neighbour(x, slot);
        }
        x
    }

    /// Site occupied at time `horizon`.
    pub fn endpoint<R: Rng + ?Sized>(&self, x0: usize, horizon: f64, rng: &mut R) -> usize {
        let mut x = x0;
        let mut t = 0.0;
        loop {
            let (dt, slot) = self.step(x, rng);
            t += dt;
            if t > horizon {
                return x;
            }
            x = self.torus.neighbour(x, slot);
        }
    }

    /// Number of jumps made before `horizon`.
    pub fn jump_count<R: Rng + ?Sized>(&self, x0: usize, horizon: f64, rng: &mut R) -> u64 {
        let mut x = x0;
        let mut t = 0.0;
        let mut n = 0;
        loop {
            let (dt, slot) = self.step(x, rng);
            t += dt;
            if t > horizon {
                return n;
            }
            n += 1;
            x = self.torus.neighbour(x, slot);
        }
    }

    pub fn trajectory<R: Rng + ?Sized>(&self, x0: usize, horizon: f64, rng: &mut R) -> Trajectory {
        let mut events = Vec::new();
        let mut x = x0;
        let mut t = 0.0;
        loop {
            let (dt, slot) = self.step(x, rng);
            t += dt;
            if t > horizon {
                break;
            }
            x = self.torus.neighbour(x, slot);
            events.push((t, x));
        }
        Trajectory {
            start: x0,
            events,
            horizon,
        }
    }
}

/// A continuous-time path: start site and the (time, new site) of each jump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub start: usize,
    pub events: Vec<(f64, usize)>,
    pub horizon: f64,
}

impl Trajectory {
    pub fn jumps(&self) -> usize {
        self.events.len()
    }

    pub fn final_site(&self) -> usize {
        self.events.last().map_or(self.start, |e| e.1)
    }

    /// Site occupied at time `t` (right-continuous).
    pub fn position_at(&self, t: f64) -> usize {
        let i = self.events.partition_point(|e| e.0 <= t);
        if i == 0 {
            self.start
        } else {
            self.events[i - 1].1
        }
    }

    pub fn validate(&self, torus: &Torus) -> Result<()> {
        torus.check_site(self.start)?;
        let mut prev_t = 0.0;
        let mut prev_x = self.start;
        for (i, &(t, x)) in self.events.iter().enumerate() {
            if !(t > prev_t) || t > self.horizon {
                return Err(SepError::NonMonotoneTimes(i));
            }
            torus.check_site(x)?;
            if !torus.are_neighbours(prev_x, x) {
                return Err(SepError::NotNeighbours { x: prev_x, y: x });
            }
            prev_t = t;
            prev_x = x;
        }
        Ok(())
    }

    fn write_csv_rows(&self, replica: usize, out: &mut String) {
        let _ = writeln!(out, "{replica},0,0,{}", self.start);
        for (i, (t, x)) in self.events.iter().enumerate() {
            let _ = writeln!(out, "{replica},{},{t},{x}", i + 1);
        }
    }

    pub fn to_csv(&self) -> String {
        trajectories_to_csv(std::slice::from_ref(self))
    }
}

/// CSV with columns `replica,event_index,time,site`; event 0 is the start.
pub fn trajectories_to_csv(trajs: &[Trajectory]) -> String {
    let mut out = String::from("replica,event_index,time,site\n");
    for (r, tr) in trajs.iter().enumerate() {
        tr.write_csv_rows(r, &mut out);
    }
    out
}

pub fn simulate_walk(env: &Environment, kind: WalkKind, x0: usize, horizon: f64, seed: u64) -> Result<Trajectory> {
    env.torus().check_site(x0)?;
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(crate::error::invalid("horizon", "must be positive and finite"));
    }
    let tables = WalkTables::new(env, kind);
    let mut rng = rng_from_seed(seed);
    Ok(tables.trajectory(x0, horizon, &mut rng))
}

/// Reparameterise an omega-walk path by `R(t) = int_0^t alpha_{X_s} ds`.
/// The jump at omega-time `t` happens at time `R(t)` in the output.
pub fn time_change(traj: &Trajectory, env: &Environment) -> Result<Trajectory> {
    env.torus().check_site(traj.start)?;
    let mut events = Vec::with_capacity(traj.events.len());
    let mut prev_t = 0.0;
    let mut site = traj.start;
    let mut r = 0.0;
    for (i, &(t, x)) in traj.events.iter().enumerate() {
        if !(t > prev_t) || t > traj.horizon {
            return Err(SepError::NonMonotoneTimes(i));
        }
        env.torus().check_site(x)?;
        r += env.at(site) as f64 * (t - prev_t);
        events.push((r, x));
        prev_t = t;
        site = x;
    }
    let horizon = r + env.at(site) as f64 * (traj.horizon - prev_t);
    Ok(Trajectory {
        start: traj.start,
        events,
        horizon,
    })
}

/// Sparse generator of RW(alpha) or RW(omega) with integer rates.
#[derive(Debug, Clone)]
pub struct GeneratorMatrix {
    kind: WalkKind,
    torus: Torus,
    rows: Vec<Vec<(usize, u64)>>,
    diag: Vec<u64>,
}

impl GeneratorMatrix {
    pub fn new(env: &Environment, kind: WalkKind) -> Self {
        let t = env.torus().clone();
        let mut rows = Vec::with_capacity(t.size());
        let mut diag = Vec::with_capacity(t.size());
        for x in 0..t.size() {
            let mut row: Vec<(usize, u64)> = Vec::with_capacity(t.degree());
            for &y in t.neighbours(x) {
                let r = match kind {
                    WalkKind::AlphaWalk => env.at(y) as u64,
                    WalkKind::OmegaWalk => env.at(x) as u64 * env.at(y) as u64,
                };
                match row.iter_mut().find(|e| e.0 == y) {
                    Some(e) => e.1 += r,
                    None => row.push((y, r)),
                }
            }
            diag.push(row.iter().map(|e| e.1).sum());
            rows.push(row);
        }
        GeneratorMatrix {
            kind,
            torus: t,
            rows,
            diag,
        }
    }

    pub fn kind(&self) -> WalkKind {
        self.kind
    }
    pub fn size(&self) -> usize {
        self.rows.len()
    }
    pub fn torus(&self) -> &Torus {
        &self.torus
    }
    /// Off-diagonal entries of row `x`.
    pub fn row(&self, x: usize) -> &[(usize, u64)] {
        &self.rows[x]
    }
    /// `-A(x, x)`.
    pub fn exit_rate(&self, x: usize) -> u64 {
        self.diag[x]
    }
    pub fn max_exit_rate(&self) -> u64 {
        self.diag.iter().copied().max().unwrap_or(0)
    }

    /// Row sums computed in integer arithmetic; all must be zero.
    pub fn row_sums(&self) -> Vec<i64> {
        self.rows
            .iter()
            .zip(&self.diag)
            .map(|(r, &d)| r.iter().map(|e| e.1 as i64).sum::<i64>() - d as i64)
            .collect()
    }

    /// `(A f)(x)`.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .enumerate()
            .map(|(x, r)| r.iter().map(|&(y, q)| q as f64 * (f[y] - f[x])).sum())
            .collect()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.size();
        let mut a = vec![0.0; n * n];
        for x in 0..n {
            a[x * n + x] = -(self.diag[x] as f64);
            for &(y, q) in &self.rows[x] {
                a[x * n + y] += q as f64;
            }
        }
        a
    }
}
