use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use sepkit::exclusion::{duality_check, simulate_sep_direct, ParticleConfig};
use sepkit::harness::{self, ConfigFile, ExperimentConfig};
use sepkit::homogenization::{estimate_sigma_msd, sigma_oracle_1d as oracle, SigmaMethod};
use sepkit::hydrodynamics::{heat_solution, MacroscopicProfile};
use sepkit::semigroup::heat_kernel as kernel;
use sepkit::{EnvLaw, SepError, WalkKind};

type Matrix = Vec<Vec<f64>>;

fn err(e: SepError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn law(spec: &str) -> PyResult<EnvLaw> {
    spec.parse().map_err(err)
}

fn walk_kind(s: &str) -> PyResult<WalkKind> {
    match s {
        "alpha" | "alpha_walk" => Ok(WalkKind::AlphaWalk),
        "omega" | "omega_walk" => Ok(WalkKind::OmegaWalk),
        _ => Err(PyValueError::new_err(format!("unknown walk kind `{s}`"))),
    }
}

/// A sampled field of maximal occupancies on a torus.
#[pyclass(name = "Environment", frozen)]
struct Environment {
    inner: sepkit::Environment,
}

#[pymethods]
impl Environment {
    #[staticmethod]
    fn sample(law_spec: &str, dims: Vec<usize>, seed: u64) -> PyResult<Self> {
        let inner = sepkit::Environment::sample(&law(law_spec)?, &dims, seed).map_err(err)?;
        Ok(Environment { inner })
    }

    #[staticmethod]
    fn from_alpha(dims: Vec<usize>, alpha: Vec<u32>) -> PyResult<Self> {
        let inner = sepkit::Environment::from_alpha(&dims, alpha).map_err(err)?;
        Ok(Environment { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = sepkit::Environment::from_json(text).map_err(err)?;
        Ok(Environment { inner })
    }

    #[getter]
    fn dims(&self) -> Vec<usize> {
        self.inner.dims().to_vec()
    }

    #[getter]
    fn alpha(&self) -> Vec<u32> {
        self.inner.alpha().to_vec()
    }

    #[getter]
    fn mean_alpha(&self) -> f64 {
        self.inner.mean_alpha()
    }

    fn content_hash(&self) -> String {
        self.inner.content_hash()
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(err)
    }

    fn __len__(&self) -> usize {
        self.inner.size()
    }

    fn __repr__(&self) -> String {
        format!("Environment(dims={:?}, law={})", self.inner.dims(), self.inner.law())
    }
}

/// Residual of the single-particle duality relation at site `x`.
#[pyfunction]
fn duality_residual(env: &Environment, eta: Vec<u32>, x: usize) -> PyResult<f64> {
    let cfg = ParticleConfig::new(&env.inner, eta).map_err(err)?;
    Ok(duality_check(&env.inner, &cfg, x).map_err(err)?.max_abs_residual)
}

/// Jump times and sites of one walk; the first entry is the start.
#[pyfunction]
#[pyo3(signature = (env, x0, horizon, seed, kind = "alpha_walk"))]
fn simulate_walk(env: &Environment, x0: usize, horizon: f64, seed: u64, kind: &str) -> PyResult<Vec<(f64, usize)>> {
    let traj = sepkit::simulate_walk(&env.inner, walk_kind(kind)?, x0, horizon, seed).map_err(err)?;
    let mut out = vec![(0.0, traj.start)];
    out.extend(traj.events.iter().copied());
    Ok(out)
}

/// Occupation numbers after running SEP(alpha) for `horizon`.
#[pyfunction]
fn simulate_sep(env: &Environment, eta: Vec<u32>, horizon: f64, seed: u64) -> PyResult<Vec<u32>> {
    let cfg = ParticleConfig::new(&env.inner, eta).map_err(err)?;
    let traj = simulate_sep_direct(&env.inner, &cfg, horizon, seed).map_err(err)?;
    Ok(traj.replay(&env.inner).map_err(err)?.eta().to_vec())
}

/// `p_t(x, y) / alpha_y`.
#[pyfunction]
#[pyo3(signature = (env, t, x, y, tol = 1e-12))]
fn heat_kernel(env: &Environment, t: f64, x: usize, y: usize, tol: f64) -> PyResult<f64> {
    kernel(&env.inner, t, x, y, tol).map_err(err)
}

#[pyfunction]
fn sigma_oracle_1d(law_spec: &str) -> PyResult<f64> {
    oracle(&law(law_spec)?).map_err(err)
}

/// `(sigma, stderr)` from mean-square displacement.
#[pyfunction]
#[pyo3(signature = (law_spec, dims, horizon, replicas, seed, time_change = false))]
fn estimate_sigma(
    law_spec: &str,
    dims: Vec<usize>,
    horizon: f64,
    replicas: usize,
    seed: u64,
    time_change: bool,
) -> PyResult<(Matrix, Matrix)> {
    let method = if time_change {
        SigmaMethod::MsdOmegaWalkTimechange
    } else {
        SigmaMethod::MsdAlphaWalk
    };
    let est = estimate_sigma_msd(&law(law_spec)?, &dims, method, horizon, replicas, seed).map_err(err)?;
    Ok((est.sigma, est.stderr))
}

/// `rho_t(u)` for the profile `(1 + sin 2 pi u) / 2` in one dimension.
#[pyfunction]
fn sine_profile_solution(sigma: f64, t: f64, u: f64) -> PyResult<f64> {
    let sol = heat_solution(&[vec![sigma]], &MacroscopicProfile::half_sine(), t).map_err(err)?;
    Ok(sol.eval(&[u]))
}

/// Runs a TOML experiment config and returns the JSON report.
#[pyfunction]
fn run_config(text: &str) -> PyResult<String> {
    let cfg = ExperimentConfig::resolve(ConfigFile::parse(text).map_err(err)?).map_err(err)?;
    harness::run(&cfg).and_then(|r| r.to_json()).map_err(err)
}

#[pymodule]
fn pysepkit(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Environment>()?;
    m.add_function(wrap_pyfunction!(duality_residual, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_walk, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_sep, m)?)?;
    m.add_function(wrap_pyfunction!(heat_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(sigma_oracle_1d, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_sigma, m)?)?;
    m.add_function(wrap_pyfunction!(sine_profile_solution, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    Ok(())
}
