//! Quenched environments of maximal occupancies and their conductances.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, SepError};
use crate::hydrodynamics::TestFunction;
use crate::lattice::Torus;
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LawKind {
    Iid,
    MarkovChain1dProduct,
    Constant,
}

/// Law of the environment field.
///
/// `Iid` draws every site independently from `weights` over `support`.
/// `MarkovChain1dProduct` runs an independent stationary Markov chain with
/// row-stochastic `transition` along the first coordinate of every line of
/// the torus; `weights` is its stationary vector. `Constant` puts the single
/// support value everywhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvLaw {
    pub kind: LawKind,
    pub support: Vec<u32>,
    pub weights: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transition: Option<Vec<Vec<f64>>>,
    pub c_max: u32,
}

impl EnvLaw {
    pub fn constant(value: u32) -> Self {
        EnvLaw {
            kind: LawKind::Constant,
            support: vec![value],
            weights: vec![1.0],
            transition: None,
            c_max: value,
        }
    }

    pub fn iid(support: &[u32], weights: &[f64]) -> Result<Self> {
        let law = EnvLaw {
            kind: LawKind::Iid,
            support: support.to_vec(),
            weights: weights.to_vec(),
            transition: None,
            c_max: support.iter().copied().max().unwrap_or(0),
        };
        law.validate()?;
        Ok(law)
    }

    /// Uniform i.i.d. law over `support`.
    pub fn uniform(support: &[u32]) -> Result<Self> {
        let w = vec![1.0 / support.len() as f64; support.len()];
        Self::iid(support, &w)
    }

    /// Markov-along-the-first-axis law; the stationary vector is computed.
    pub fn markov(support: &[u32], transition: Vec<Vec<f64>>) -> Result<Self> {
        check_stochastic(&transition, support.len())?;
        let weights = stationary_vector(&transition)?;
        let law = EnvLaw {
            kind: LawKind::MarkovChain1dProduct,
            support: support.to_vec(),
            weights,
            transition: Some(transition),
            c_max: support.iter().copied().max().unwrap_or(0),
        };
        law.validate()?;
        Ok(law)
    }

    pub fn with_c_max(mut self, c_max: u32) -> Result<Self> {
        self.c_max = c_max;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SepError::InvalidLaw(m));
        if self.support.is_empty() {
            return bad("empty support".into());
        }
        if self.c_max == 0 {
            return bad("c_max must be positive".into());
        }
        if let Some(v) = self.support.iter().find(|&&v| v == 0 || v > self.c_max) {
            return bad(format!("support value {v} outside [1, {}]", self.c_max));
        }
        if self.weights.len() != self.support.len() {
            return bad("weights and support differ in length".into());
        }
        if self.weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return bad("weights must be finite and non-negative".into());
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return bad(format!("weights sum to {total}, not 1"));
        }
        match self.kind {
            LawKind::Constant => {
                if self.support.len() != 1 {
                    return bad("constant law needs exactly one support value".into());
                }
            }
            LawKind::Iid => {}
            LawKind::MarkovChain1dProduct => {
                let p = self
                    .transition
                    .as_ref()
                    .ok_or_else(|| SepError::InvalidLaw("markov law without transition".into()))?;
                check_stochastic(p, self.support.len())?;
                let n = self.support.len();
                for j in 0..n {
                    let pj: f64 = (0..n).map(|i| self.weights[i] * p[i][j]).sum();
                    if (pj - self.weights[j]).abs() > 1e-10 {
                        return bad("weights are not stationary for the transition matrix".into());
                    }
                }
            }
        }
        Ok(())
    }

    pub fn is_iid(&self) -> bool {
        matches!(self.kind, LawKind::Iid | LawKind::Constant)
    }

    /// `E[alpha_0]`.
    pub fn mean(&self) -> f64 {
        self.support
            .iter()
            .zip(&self.weights)
            .map(|(&v, &w)| v as f64 * w)
            .sum()
    }

    /// `E[1 / alpha_0]`.
    pub fn mean_inverse(&self) -> f64 {
        self.support
            .iter()
            .zip(&self.weights)
            .map(|(&v, &w)| w / v as f64)
            .sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.support
            .iter()
            .zip(&self.weights)
            .map(|(&v, &w)| w * (v as f64 - m).powi(2))
            .sum()
    }

    fn cumulative(&self) -> Vec<f64> {
        cumulative(&self.weights)
    }
}

fn cumulative(w: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out: Vec<f64> = w
        .iter()
        .map(|x| {
            acc += x;
            acc
        })
        .collect();
    if let Some(last) = out.last_mut() {
        *last = f64::INFINITY;
    }
    out
}

fn pick(cum: &[f64], u: f64) -> usize {
    cum.iter().position(|&c| u < c).unwrap_or(cum.len() - 1)
}

fn check_stochastic(p: &[Vec<f64>], n: usize) -> Result<()> {
    if p.len() != n || p.iter().any(|r| r.len() != n) {
        return Err(SepError::InvalidLaw(format!("transition matrix must be {n}x{n}")));
    }
    for (i, row) in p.iter().enumerate() {
        if row.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(SepError::InvalidLaw(format!("row {i} has a negative entry")));
        }
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(SepError::InvalidLaw(format!("row {i} sums to {s}")));
        }
    }
    Ok(())
}

/// Stationary vector of an irreducible stochastic matrix, by solving
/// `pi (P - I) = 0`, `sum(pi) = 1` with partial pivoting.
pub fn stationary_vector(p: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = p.len();
    // rows of the system: equation j is sum_i pi_i (P_ij - delta_ij) = 0
    let mut a = vec![vec![0.0; n + 1]; n];
    for j in 0..n {
        for i in 0..n {
            a[j][i] = p[i][j] - if i == j { 1.0 } else { 0.0 };
        }
    }
    for i in 0..n {
        a[n - 1][i] = 1.0;
    }
    a[n - 1][n] = 1.0;
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))
            .unwrap();
        if a[piv][col].abs() < 1e-14 {
            return Err(SepError::InvalidLaw("transition matrix is not irreducible".into()));
        }
        a.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                if f != 0.0 {
                    for c in col..=n {
                        a[r][c] -= f * a[col][c];
                    }
                }
            }
        }
    }
    Ok((0..n).map(|i| a[i][n] / a[i][i]).collect())
}

impl fmt::Display for EnvLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join_u = |v: &[u32]| v.iter().map(u32::to_string).collect::<Vec<_>>().join(",");
        let join_f = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
        match self.kind {
            LawKind::Constant => write!(f, "const:{}", self.support[0]),
            LawKind::Iid => write!(f, "iid:{}@{}", join_u(&self.support), join_f(&self.weights)),
            LawKind::MarkovChain1dProduct => {
                let rows: Vec<String> = self
                    .transition
                    .as_ref()
                    .map(|p| p.iter().map(|r| join_f(r)).collect())
                    .unwrap_or_default();
                write!(f, "markov:{}@{}", join_u(&self.support), rows.join(";"))
            }
        }
    }
}

/// Parses `const:M`, `iid:V1,V2,..` (uniform), `iid:V1,V2@W1,W2` and
/// `markov:V1,V2@P11,P12;P21,P22`.
impl FromStr for EnvLaw {
    type Err = SepError;
    fn from_str(s: &str) -> Result<Self> {
        let err = |m: &str| SepError::InvalidLaw(format!("cannot parse law `{s}`: {m}"));
        let (kind, rest) = s.split_once(':').ok_or_else(|| err("missing `:`"))?;
        let (vals, params) = match rest.split_once('@') {
            Some((v, p)) => (v, Some(p)),
            None => (rest, None),
        };
        let support: Vec<u32> = vals
            .split(',')
            .map(|v| v.trim().parse::<u32>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| err("bad support value"))?;
        let floats = |t: &str| -> Result<Vec<f64>> {
            t.split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| err("bad number"))
        };
        match kind.trim() {
            "const" | "constant" => {
                if support.len() != 1 {
                    return Err(err("constant law takes one value"));
                }
                let law = EnvLaw::constant(support[0]);
                law.validate()?;
                Ok(law)
            }
            "iid" => match params {
                None => EnvLaw::uniform(&support),
                Some(p) => EnvLaw::iid(&support, &floats(p)?),
            },
            "markov" => {
                let p = params.ok_or_else(|| err("markov law needs a transition matrix"))?;
                let rows = p.split(';').map(floats).collect::<Result<Vec<_>>>()?;
                EnvLaw::markov(&support, rows)
            }
            other => Err(err(&format!("unknown law kind `{other}`"))),
        }
    }
}

/// One realisation of the environment on a finite torus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EnvironmentRecord")]
pub struct Environment {
    #[serde(rename = "dims")]
    torus: Torus,
    c_max: u32,
    law: EnvLaw,
    seed: u64,
    alpha: Vec<u32>,
}

#[derive(Deserialize)]
struct EnvironmentRecord {
    dims: Vec<usize>,
    c_max: u32,
    law: EnvLaw,
    seed: u64,
    alpha: Vec<u32>,
}

impl TryFrom<EnvironmentRecord> for Environment {
    type Error = SepError;
    fn try_from(r: EnvironmentRecord) -> Result<Self> {
        r.law.validate()?;
        Environment::build(Torus::new(&r.dims)?, r.alpha, r.c_max, r.law, r.seed)
    }
}

impl Environment {
    fn build(torus: Torus, alpha: Vec<u32>, c_max: u32, law: EnvLaw, seed: u64) -> Result<Self> {
        if alpha.len() != torus.size() {
            return Err(SepError::InvalidConfig(format!(
                "alpha has {} entries for {} sites",
                alpha.len(),
                torus.size()
            )));
        }
        if let Some((x, v)) = alpha.iter().enumerate().find(|(_, &v)| v == 0 || v > c_max) {
            return Err(SepError::InvalidConfig(format!(
                "alpha[{x}] = {v} violates 1 <= alpha <= {c_max}"
            )));
        }
        Ok(Environment {
            torus,
            c_max,
            law,
            seed,
            alpha,
        })
    }

    /// Draw an environment; deterministic in `(law, dims, seed)`.
    pub fn sample(law: &EnvLaw, dims: &[usize], seed: u64) -> Result<Self> {
        law.validate()?;
        let torus = Torus::new(dims)?;
        let n = torus.size();
        let mut rng = rng_from_seed(seed);
        let alpha = match law.kind {
            LawKind::Constant => vec![law.support[0]; n],
            LawKind::Iid => {
                let cum = law.cumulative();
                (0..n).map(|_| law.support[pick(&cum, rng.random::<f64>())]).collect()
            }
            LawKind::MarkovChain1dProduct => {
                let p = law.transition.as_ref().expect("validated");
                let rows: Vec<Vec<f64>> = p.iter().map(|r| cumulative(r)).collect();
                let start = law.cumulative();
                let side = dims[0];
                let lines = n / side;
                let mut states = vec![0usize; n];
                for line in 0..lines {
                    let mut s = pick(&start, rng.random::<f64>());
                    for c in 0..side {
                        if c > 0 {
                            s = pick(&rows[s], rng.random::<f64>());
                        }
                        states[c * lines + line] = s;
                    }
                }
                states.into_iter().map(|s| law.support[s]).collect()
            }
        };
        Environment::build(torus, alpha, law.c_max, law.clone(), seed)
    }

    /// Wrap a hand-built field. The recorded law is the empirical i.i.d.
    /// law of the given values and the seed is 0.
    pub fn from_alpha(dims: &[usize], alpha: Vec<u32>) -> Result<Self> {
        let torus = Torus::new(dims)?;
        let mut values: Vec<u32> = alpha.clone();
        values.sort_unstable();
        values.dedup();
        if values.first() == Some(&0) {
            return Err(SepError::InvalidConfig("alpha must be at least 1".into()));
        }
        let n = alpha.len().max(1) as f64;
        let weights: Vec<f64> = values
            .iter()
            .map(|v| alpha.iter().filter(|&&a| a == *v).count() as f64 / n)
            .collect();
        let c_max = values.last().copied().unwrap_or(1);
        let law = EnvLaw {
            kind: if values.len() == 1 {
                LawKind::Constant
            } else {
                LawKind::Iid
            },
            support: values,
            weights,
            transition: None,
            c_max,
        };
        Environment::build(torus, alpha, c_max, law, 0)
    }

    pub fn torus(&self) -> &Torus {
        &self.torus
    }
    pub fn dims(&self) -> &[usize] {
        self.torus.dims()
    }
    pub fn size(&self) -> usize {
        self.torus.size()
    }
    pub fn dim(&self) -> usize {
        self.torus.dim()
    }
    pub fn alpha(&self) -> &[u32] {
        &self.alpha
    }
    #[inline]
    pub fn at(&self, x: usize) -> u32 {
        self.alpha[x]
    }
    pub fn c_max(&self) -> u32 {
        self.c_max
    }
    pub fn law(&self) -> &EnvLaw {
        &self.law
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Spatial mean of alpha over the torus.
    pub fn mean_alpha(&self) -> f64 {
        self.alpha.iter().map(|&a| a as f64).sum::<f64>() / self.size() as f64
    }

    pub fn total_alpha(&self) -> u64 {
        self.alpha.iter().map(|&a| a as u64).sum()
    }

    /// Short content hash over dims and alpha (hex, 16 chars).
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        for &l in self.dims() {
            h.update((l as u64).to_le_bytes());
        }
        for &a in &self.alpha {
            h.update(a.to_le_bytes());
        }
        let digest = h.finalize();
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Bond conductances `omega_xy = alpha_x * alpha_y`, stored per directed
/// neighbour slot (`index = x * 2d + slot`).
#[derive(Debug, Clone, PartialEq)]
pub struct ConductanceField {
    torus: Torus,
    omega: Vec<u64>,
}

impl ConductanceField {
    #[inline]
    pub fn get(&self, x: usize, slot: usize) -> u64 {
        self.omega[x * self.torus.degree() + slot]
    }

    pub fn values(&self) -> &[u64] {
        &self.omega
    }

    /// `omega` over the undirected bonds `(x, x + e_k)`.
    pub fn forward_bonds(&self) -> Vec<((usize, usize), u64)> {
        let d = self.torus.dim();
        (0..self.torus.size())
            .flat_map(|x| (0..d).map(move |k| (x, 2 * k)))
            .map(|(x, slot)| ((x, self.torus.neighbour(x, slot)), self.get(x, slot)))
            .collect()
    }

    pub fn max(&self) -> u64 {
        self.omega.iter().copied().max().unwrap_or(0)
    }

    pub fn min(&self) -> u64 {
        self.omega.iter().copied().min().unwrap_or(0)
    }
}

pub fn conductances(env: &Environment) -> ConductanceField {
    let t = env.torus();
    let mut omega = Vec::with_capacity(t.size() * t.degree());
    for x in 0..t.size() {
        for &y in t.neighbours(x) {
            omega.push(env.at(x) as u64 * env.at(y) as u64);
        }
    }
    ConductanceField {
        torus: t.clone(),
        omega,
    }
}

/// Environment seen from `shift`: `alpha'(x) = alpha(x + shift)`.
pub fn translate(env: &Environment, shift: &[i64]) -> Result<Environment> {
    if shift.len() != env.dim() {
        return Err(SepError::InvalidDims(format!(
            "shift has {} components for a {}-dimensional torus",
            shift.len(),
            env.dim()
        )));
    }
    let t = env.torus();
    let alpha = (0..t.size()).map(|x| env.at(t.shift(x, shift))).collect();
    Ok(Environment {
        torus: t.clone(),
        c_max: env.c_max,
        law: env.law.clone(),
        seed: env.seed,
        alpha,
    })
}

/// `(1 / N^d) * sum_x F(x / N) * alpha_x`, with sites embedded at `x / N` on
/// the macroscopic torus of period `L_k / N`.
pub fn ergodic_average(env: &Environment, f: &TestFunction, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(crate::error::invalid("N", "scale must be positive"));
    }
    let periods: Vec<f64> = env.dims().iter().map(|&l| l as f64 / n as f64).collect();
    f.check_fits(&periods)?;
    let t = env.torus();
    let scale = (n as f64).powi(env.dim() as i32);
    let mut u = vec![0.0; env.dim()];
    let terms = (0..t.size()).map(|x| {
        for (k, c) in t.coords(x).into_iter().enumerate() {
            u[k] = c as f64 / n as f64;
        }
        f.eval_periodic(&u, &periods) * env.at(x) as f64
    });
    Ok(crate::stats::compensated_sum(terms.collect::<Vec<_>>()) / scale)
}
