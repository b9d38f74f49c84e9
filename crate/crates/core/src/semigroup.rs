//! Transition semigroups of the walks on a finite torus.
//!
//! `exp(tA)` is evaluated by uniformization: with `Lambda` the largest exit
//! rate, `P = I + A / Lambda` is a stochastic matrix and
//! `exp(tA) = sum_k Poisson(Lambda t; k) P^k`. Poisson weights are built
//! outward from the mode and the two tails are cut once their geometric
//! bounds fall below `tol / 2` each.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::environment::Environment;
use crate::error::{invalid, Result, SepError};
use crate::walk::{GeneratorMatrix, WalkKind};

/// Largest torus for which dense tables are built.
pub const DENSE_LIMIT: usize = 4096;

/// Truncated Poisson(`mu`) weights; returns the first index and the weights.
pub fn poisson_weights(mu: f64, tol: f64) -> (usize, Vec<f64>) {
    if mu <= 0.0 {
        return (0, vec![1.0]);
    }
    let m = mu.floor() as usize;
    let wm = (-mu + m as f64 * mu.ln() - ln_gamma(m as f64 + 1.0)).exp();
    let mut right = vec![wm];
    let mut k = m;
    let mut w = wm;
    loop {
        w *= mu / (k + 1) as f64;
        k += 1;
        right.push(w);
        let r = mu / (k + 1) as f64;
        if r < 1.0 && w * r / (1.0 - r) < 0.5 * tol {
            break;
        }
    }
    let mut left = Vec::new();
    let mut k = m;
    let mut w = wm;
    while k > 0 {
        let r = k as f64 / mu;
        if r < 1.0 && w * r / (1.0 - r) < 0.5 * tol {
            break;
        }
        w *= r;
        k -= 1;
        left.push(w);
    }
    let first = k;
    left.reverse();
    left.extend(right);
    // ln_gamma at the mode is only good to ~1e-10 relative for large mu.
    let total: f64 = left.iter().sum();
    left.iter_mut().for_each(|w| *w /= total);
    (first, left)
}

/// Uniformized jump kernel of a generator, stored flat.
#[derive(Debug, Clone)]
pub struct Uniformizer {
    n: usize,
    lambda: f64,
    offsets: Vec<usize>,
    targets: Vec<usize>,
    probs: Vec<f64>,
    stay: Vec<f64>,
}

impl Uniformizer {
    pub fn new(gen: &GeneratorMatrix) -> Self {
        let n = gen.size();
        let lambda = gen.max_exit_rate().max(1) as f64;
        let mut offsets = Vec::with_capacity(n + 1);
        let mut targets = Vec::new();
        let mut probs = Vec::new();
        let mut stay = Vec::with_capacity(n);
        offsets.push(0);
        for x in 0..n {
            for &(y, q) in gen.row(x) {
                targets.push(y);
                probs.push(q as f64 / lambda);
            }
            offsets.push(targets.len());
            stay.push(1.0 - gen.exit_rate(x) as f64 / lambda);
        }
        Uniformizer {
            n,
            lambda,
            offsets,
            targets,
            probs,
            stay,
        }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    fn step_right(&self, v: &[f64], out: &mut [f64]) {
        for x in 0..self.n {
            let mut s = self.stay[x] * v[x];
            for i in self.offsets[x]..self.offsets[x + 1] {
                s += self.probs[i] * v[self.targets[i]];
            }
            out[x] = s;
        }
    }

    fn step_left(&self, v: &[f64], out: &mut [f64]) {
        for (o, (s, vi)) in out.iter_mut().zip(self.stay.iter().zip(v)) {
            *o = s * vi;
        }
        for x in 0..self.n {
            let vx = v[x];
            if vx != 0.0 {
                for i in self.offsets[x]..self.offsets[x + 1] {
                    out[self.targets[i]] += self.probs[i] * vx;
                }
            }
        }
    }

    fn run(&self, v0: &[f64], t: f64, tol: f64, left: bool) -> Result<Vec<f64>> {
        if !(tol > 0.0) {
            return Err(invalid("tol", "must be positive"));
        }
        if !(t >= 0.0 && t.is_finite()) {
            return Err(invalid("t", "must be finite and non-negative"));
        }
        if v0.len() != self.n {
            return Err(invalid("vector", format!("length {} for {} sites", v0.len(), self.n)));
        }
        let (first, w) = poisson_weights(self.lambda * t, tol);
        let mut v = v0.to_vec();
        let mut next = vec![0.0; self.n];
        let mut acc = vec![0.0; self.n];
        for k in 0..first + w.len() {
            if k >= first {
                let wk = w[k - first];
                for (a, vi) in acc.iter_mut().zip(&v) {
                    *a += wk * vi;
                }
            }
            if k + 1 < first + w.len() {
                if left {
                    self.step_left(&v, &mut next);
                } else {
                    self.step_right(&v, &mut next);
                }
                std::mem::swap(&mut v, &mut next);
            }
        }
        Ok(acc)
    }

    /// `(exp(tA) f)(x) = E_x f(X_t)`.
    pub fn apply(&self, f: &[f64], t: f64, tol: f64) -> Result<Vec<f64>> {
        self.run(f, t, tol, false)
    }

    /// `(mu exp(tA))(y)`: the law at time `t` from initial law `mu`.
    pub fn apply_transpose(&self, mu: &[f64], t: f64, tol: f64) -> Result<Vec<f64>> {
        self.run(mu, t, tol, true)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SemigroupMethod {
    Uniformization,
    ScalingSquaring,
}

/// Dense `p_t(x, y)`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SemigroupTable {
    pub t: f64,
    pub size: usize,
    pub method: SemigroupMethod,
    pub tol: f64,
    pub p: Vec<f64>,
}

impl SemigroupTable {
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.p[x * self.size + y]
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.p[x * self.size..(x + 1) * self.size]
    }

    pub fn max_row_sum_error(&self) -> f64 {
        (0..self.size)
            .map(|x| (self.row(x).iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// `max |alpha_x p(x,y) - alpha_y p(y,x)|`.
    pub fn max_reversibility_violation(&self, env: &Environment) -> f64 {
        let mut worst: f64 = 0.0;
        for x in 0..self.size {
            for y in x + 1..self.size {
                let v = (env.at(x) as f64 * self.get(x, y) - env.at(y) as f64 * self.get(y, x)).abs();
                worst = worst.max(v);
            }
        }
        worst
    }

    /// Entrywise `max |P Q - R|` for tables of equal size.
    pub fn chapman_kolmogorov_error(&self, other: &SemigroupTable, sum: &SemigroupTable) -> f64 {
        let n = self.size;
        let prod = matmul(&self.p, &other.p, n);
        prod.iter().zip(&sum.p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &SemigroupTable) -> f64 {
        self.p
            .iter()
            .zip(&other.p)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Header line `t,size,tol,method`, its values, then one line per row.
    pub fn to_csv(&self) -> String {
        let method = match self.method {
            SemigroupMethod::Uniformization => "uniformization",
            SemigroupMethod::ScalingSquaring => "scaling_squaring",
        };
        let mut out = format!("t,size,tol,method\n{},{},{},{}\n", self.t, self.size, self.tol, method);
        for x in 0..self.size {
            let line: Vec<String> = self.row(x).iter().map(|v| v.to_string()).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(s: &str) -> Result<Self> {
        let bad = |m: &str| SepError::Parse(format!("semigroup csv: {m}"));
        let mut lines = s.lines();
        if lines.next() != Some("t,size,tol,method") {
            return Err(bad("missing header"));
        }
        let meta: Vec<&str> = lines
            .next()
            .ok_or_else(|| bad("missing metadata"))?
            .split(',')
            .collect();
        if meta.len() != 4 {
            return Err(bad("metadata needs four fields"));
        }
        let t: f64 = meta[0].parse().map_err(|_| bad("t"))?;
        let size: usize = meta[1].parse().map_err(|_| bad("size"))?;
        let tol: f64 = meta[2].parse().map_err(|_| bad("tol"))?;
        let method = match meta[3] {
            "uniformization" => SemigroupMethod::Uniformization,
            "scaling_squaring" => SemigroupMethod::ScalingSquaring,
            _ => return Err(bad("method")),
        };
        let mut p = Vec::with_capacity(size * size);
        for line in lines.take(size) {
            for v in line.split(',') {
                p.push(v.parse::<f64>().map_err(|_| bad("entry"))?);
            }
        }
        if p.len() != size * size {
            return Err(bad("matrix has the wrong number of entries"));
        }
        Ok(SemigroupTable {
            t,
            size,
            method,
            tol,
            p,
        })
    }
}

fn matmul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut c = vec![0.0; n * n];
    c.par_chunks_mut(n).enumerate().for_each(|(i, ci)| {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik != 0.0 {
                for (cij, bkj) in ci.iter_mut().zip(&b[k * n..(k + 1) * n]) {
                    *cij += aik * bkj;
                }
            }
        }
    });
    c
}

fn check_dense(n: usize) -> Result<()> {
    if n > DENSE_LIMIT {
        Err(SepError::TooLarge {
            size: n,
            limit: DENSE_LIMIT,
        })
    } else {
        Ok(())
    }
}

/// Dense `p_t` by uniformization, one row per initial site.
pub fn semigroup(gen: &GeneratorMatrix, t: f64, tol: f64) -> Result<SemigroupTable> {
    let n = gen.size();
    check_dense(n)?;
    let u = Uniformizer::new(gen);
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|x| {
            let mut e = vec![0.0; n];
            e[x] = 1.0;
            u.apply_transpose(&e, t, tol)
        })
        .collect::<Result<_>>()?;
    let p = rows.into_iter().flatten().map(|v| v.clamp(0.0, 1.0)).collect();
    Ok(SemigroupTable {
        t,
        size: n,
        method: SemigroupMethod::Uniformization,
        tol,
        p,
    })
}

/// Dense `exp(tA)` by Taylor expansion of `exp(tA / 2^s)` and squaring.
pub fn scaling_squaring(gen: &GeneratorMatrix, t: f64) -> Result<SemigroupTable> {
    let n = gen.size();
    check_dense(n)?;
    if !(t >= 0.0 && t.is_finite()) {
        return Err(invalid("t", "must be finite and non-negative"));
    }
    let a = gen.to_dense();
    let norm = 2.0 * gen.max_exit_rate() as f64 * t;
    let mut s = 0;
    while norm / 2f64.powi(s) > 0.5 {
        s += 1;
    }
    let h = t / 2f64.powi(s);
    let m: Vec<f64> = a.iter().map(|v| v * h).collect();
    let mut result = vec![0.0; n * n];
    let mut term = vec![0.0; n * n];
    for i in 0..n {
        result[i * n + i] = 1.0;
        term[i * n + i] = 1.0;
    }
    for k in 1..=20 {
        term = matmul(&term, &m, n);
        let inv = 1.0 / k as f64;
        term.iter_mut().for_each(|v| *v *= inv);
        for (r, v) in result.iter_mut().zip(&term) {
            *r += v;
        }
    }
    for _ in 0..s {
        result = matmul(&result, &result, n);
    }
    Ok(SemigroupTable {
        t,
        size: n,
        method: SemigroupMethod::ScalingSquaring,
        tol: f64::EPSILON * n as f64,
        p: result,
    })
}

/// `q_t(x, y) = p_t(x, y) / alpha_y` for RW(alpha).
pub fn heat_kernel(env: &Environment, t: f64, x: usize, y: usize, tol: f64) -> Result<f64> {
    env.torus().check_site(x)?;
    env.torus().check_site(y)?;
    let u = Uniformizer::new(&GeneratorMatrix::new(env, WalkKind::AlphaWalk));
    let mut e = vec![0.0; env.size()];
    e[x] = 1.0;
    let row = u.apply_transpose(&e, t, tol)?;
    Ok(row[y].max(0.0) / env.at(y) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    /// Smallest `c` valid over the whole grid.
    pub c: f64,
    pub witness_t: f64,
    pub witness_x: usize,
    pub witness_y: usize,
    /// `(t, smallest c at that t)`.
    pub per_time: Vec<(f64, f64)>,
}

/// Smallest `c` with `p_t(x,y) <= c (1 v t^(d/2))^-1 exp(-|x-y| / (1 v sqrt t))`
/// over all pairs and grid times; `|x-y|` is the minimal-image distance.
pub fn heat_kernel_bound_check(env: &Environment, t_grid: &[f64], tol: f64) -> Result<BoundReport> {
    if t_grid.is_empty() {
        return Err(invalid("t_grid", "must not be empty"));
    }
    let gen = GeneratorMatrix::new(env, WalkKind::AlphaWalk);
    let torus = env.torus();
    let d = env.dim() as i32;
    let mut report = BoundReport {
        c: 0.0,
        witness_t: t_grid[0],
        witness_x: 0,
        witness_y: 0,
        per_time: Vec::with_capacity(t_grid.len()),
    };
    for &t in t_grid {
        let table = semigroup(&gen, t, tol)?;
        let on_diag = t.sqrt().powi(d).max(1.0);
        let scale = t.sqrt().max(1.0);
        let mut best = (0.0, 0, 0);
        for x in 0..table.size {
            for y in 0..table.size {
                let c = table.get(x, y) * on_diag * (torus.distance(x, y) / scale).exp();
                if c > best.0 {
                    best = (c, x, y);
                }
            }
        }
        report.per_time.push((t, best.0));
        if best.0 > report.c {
            report.c = best.0;
            report.witness_t = t;
            report.witness_x = best.1;
            report.witness_y = best.2;
        }
    }
    Ok(report)
}

/// `(1/2) sum_x sum_{y ~ x} alpha_x alpha_y (f(y) - f(x))^2`.
pub fn dirichlet_form(env: &Environment, f: &[f64]) -> Result<f64> {
    if f.len() != env.size() {
        return Err(invalid("f", format!("length {} for {} sites", f.len(), env.size())));
    }
    let t = env.torus();
    let terms = (0..t.size()).flat_map(|x| {
        (0..t.dim()).map(move |k| {
            let y = t.neighbour(x, 2 * k);
            env.at(x) as f64 * env.at(y) as f64 * (f[y] - f[x]).powi(2)
        })
    });
    Ok(crate::stats::compensated_sum(terms))
}

/// `D(f) / (|f|_{2,alpha}^{2 + 4/d} |f|_{1,alpha}^{-4/d})`.
pub fn nash_ratio(env: &Environment, f: &[f64]) -> Result<f64> {
    let dform = dirichlet_form(env, f)?;
    let l2sq: f64 = f.iter().zip(env.alpha()).map(|(v, &a)| a as f64 * v * v).sum();
    let l1: f64 = f.iter().zip(env.alpha()).map(|(v, &a)| a as f64 * v.abs()).sum();
    if l1 == 0.0 {
        return Err(invalid("f", "must not vanish identically"));
    }
    let d = env.dim() as f64;
    Ok(dform / (l2sq.powf(1.0 + 2.0 / d) * l1.powf(-4.0 / d)))
}
