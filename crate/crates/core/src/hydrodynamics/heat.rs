//! Periodic heat kernels, Gaussian semigroups, quadrature and a
//! Crank-Nicolson solver for `d/dt rho = (1/2) div(Sigma grad rho)`.

use crate::error::{invalid, Result, SepError};

use super::testfn::{wrap, TestFunction, TestFunctionKind, IMAGE_TOL};

/// Lower Cholesky factor; fails unless `m` is symmetric positive definite.
pub fn cholesky(m: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let d = m.len();
    if m.iter().any(|r| r.len() != d) {
        return Err(invalid("Sigma", "must be square"));
    }
    for i in 0..d {
        for j in 0..i {
            let scale = m[i][j].abs().max(m[j][i].abs()).max(1e-300);
            if (m[i][j] - m[j][i]).abs() > 1e-9 * scale {
                return Err(invalid("Sigma", "must be symmetric"));
            }
        }
    }
    let mut l = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let v = m[i][i] - s;
                if !(v > 0.0) || !v.is_finite() {
                    return Err(SepError::DegenerateSigma);
                }
                l[i][j] = v.sqrt();
            } else {
                l[i][j] = (m[i][j] - s) / l[j][j];
            }
        }
    }
    Ok(l)
}

/// Inverse and determinant of a symmetric positive definite matrix.
pub fn spd_inverse(m: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, f64)> {
    let l = cholesky(m)?;
    let d = m.len();
    let det = l.iter().enumerate().map(|(i, r)| r[i] * r[i]).product();
    let mut inv = vec![vec![0.0; d]; d];
    for col in 0..d {
        let mut y = vec![0.0; d];
        for i in 0..d {
            let e = if i == col { 1.0 } else { 0.0 };
            y[i] = (e - (0..i).map(|k| l[i][k] * y[k]).sum::<f64>()) / l[i][i];
        }
        let mut x = vec![0.0; d];
        for i in (0..d).rev() {
            x[i] = (y[i] - (i + 1..d).map(|k| l[k][i] * x[k]).sum::<f64>()) / l[i][i];
        }
        for i in 0..d {
            inv[i][col] = x[i];
        }
    }
    Ok((inv, det))
}

/// `sum over images of exp(-(1/2) r^T C^-1 r)`, `r = u - center` on the
/// torus with the given periods.
#[derive(Debug, Clone)]
pub struct PeriodicGaussian {
    center: Vec<f64>,
    inv: Vec<Vec<f64>>,
    periods: Vec<f64>,
    reach: Vec<i64>,
    pub det: f64,
}

impl PeriodicGaussian {
    pub fn new(center: &[f64], cov: &[Vec<f64>], periods: &[f64]) -> Result<Self> {
        if cov.len() != center.len() || periods.len() != center.len() {
            return Err(SepError::InvalidDims("covariance, center and periods disagree".into()));
        }
        let (inv, det) = spd_inverse(cov)?;
        let tail = (2.0 * (1.0 / IMAGE_TOL).ln()).sqrt();
        let reach = (0..cov.len())
            .map(|k| ((tail * cov[k][k].sqrt()) / periods[k]).ceil() as i64 + 1)
            .collect();
        Ok(PeriodicGaussian {
            center: center.to_vec(),
            inv,
            periods: periods.to_vec(),
            reach,
            det,
        })
    }

    pub fn eval(&self, u: &[f64]) -> f64 {
        let d = self.center.len();
        let base: Vec<f64> = (0..d).map(|k| wrap(u[k] - self.center[k], self.periods[k])).collect();
        if d == 1 {
            let (p, a) = (self.periods[0], self.inv[0][0]);
            return (-self.reach[0]..=self.reach[0])
                .map(|m| {
                    let x = base[0] + m as f64 * p;
                    (-0.5 * a * x * x).exp()
                })
                .sum();
        }
        let mut idx: Vec<i64> = self.reach.iter().map(|r| -r).collect();
        let mut r = vec![0.0; d];
        let mut total = 0.0;
        loop {
            for k in 0..d {
                r[k] = base[k] + idx[k] as f64 * self.periods[k];
            }
            let mut q = 0.0;
            for i in 0..d {
                for j in 0..d {
                    q += r[i] * self.inv[i][j] * r[j];
                }
            }
            total += (-0.5 * q).exp();
            let mut k = 0;
            loop {
                if k == d {
                    return total;
                }
                idx[k] += 1;
                if idx[k] <= self.reach[k] {
                    break;
                }
                idx[k] = -self.reach[k];
                k += 1;
            }
        }
    }
}

/// Periodised Gaussian density with covariance `t Sigma` on the torus.
pub fn heat_kernel_density(sigma: &[Vec<f64>], t: f64, u: &[f64], periods: &[f64]) -> Result<f64> {
    if !(t > 0.0) {
        return Err(invalid("t", "must be positive for a density"));
    }
    let cov: Vec<Vec<f64>> = sigma.iter().map(|r| r.iter().map(|v| v * t).collect()).collect();
    let pg = PeriodicGaussian::new(&vec![0.0; u.len()], &cov, periods)?;
    let norm = ((2.0 * std::f64::consts::PI).powi(u.len() as i32) * pg.det).sqrt();
    Ok(pg.eval(u) / norm)
}

/// `S^Sigma_t G` for a Gaussian bump `G`, in closed form: the covariance
/// `w^2 I` grows to `w^2 I + t Sigma` and the amplitude shrinks by
/// `sqrt(det(w^2 I) / det(w^2 I + t Sigma))`.
#[derive(Debug, Clone)]
pub struct GaussianSemigroup {
    kernel: PeriodicGaussian,
    scale: f64,
}

impl GaussianSemigroup {
    pub fn new(g: &TestFunction, sigma: &[Vec<f64>], t: f64, periods: &[f64]) -> Result<Self> {
        if g.kind != TestFunctionKind::GaussianBump {
            return Err(SepError::Unsupported(
                "closed-form continuum semigroup needs a gaussian_bump test function".into(),
            ));
        }
        if !(t >= 0.0) {
            return Err(invalid("t", "must be non-negative"));
        }
        cholesky(sigma)?;
        let d = g.dim();
        let w2 = g.width * g.width;
        let cov: Vec<Vec<f64>> = (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| t * sigma[i][j] + if i == j { w2 } else { 0.0 })
                    .collect()
            })
            .collect();
        let kernel = PeriodicGaussian::new(&g.center, &cov, periods)?;
        let scale = g.amplitude * (w2.powi(d as i32) / kernel.det).sqrt();
        Ok(GaussianSemigroup { kernel, scale })
    }

    pub fn eval(&self, u: &[f64]) -> f64 {
        self.scale * self.kernel.eval(u)
    }
}

/// `n`-point Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Tensor Gauss-Legendre over the box `[lo, hi]` with `panels` panels of
/// `order` nodes per axis.
pub fn integrate_box<F: Fn(&[f64]) -> f64>(f: F, lo: &[f64], hi: &[f64], panels: usize, order: usize) -> f64 {
    let (x, w) = gauss_legendre(order);
    let d = lo.len();
    let axis: Vec<Vec<(f64, f64)>> = (0..d)
        .map(|k| {
            let h = (hi[k] - lo[k]) / panels as f64;
            (0..panels)
                .flat_map(|p| {
                    let a = lo[k] + p as f64 * h;
                    x.iter()
                        .zip(&w)
                        .map(move |(xi, wi)| (a + 0.5 * h * (xi + 1.0), 0.5 * h * wi))
                })
                .collect()
        })
        .collect();
    let m = axis[0].len();
    let mut idx = vec![0usize; d];
    let mut u = vec![0.0; d];
    let mut acc = crate::stats::Neumaier::default();
    loop {
        let mut weight = 1.0;
        for k in 0..d {
            u[k] = axis[k][idx[k]].0;
            weight *= axis[k][idx[k]].1;
        }
        acc.add(weight * f(&u));
        let mut k = 0;
        loop {
            if k == d {
                return acc.value();
            }
            idx[k] += 1;
            if idx[k] < m {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// Crank-Nicolson for `d/dt rho = (sigma / 2) rho''` on the unit circle,
/// `m` cells, `steps` time steps. Returns cell-centre values at time `t`.
pub fn crank_nicolson_1d<F: Fn(f64) -> f64>(
    initial: F,
    sigma: f64,
    t: f64,
    m: usize,
    steps: usize,
) -> Result<Vec<f64>> {
    if m < 3 || steps == 0 {
        return Err(invalid("grid", "need at least 3 cells and 1 step"));
    }
    if !(sigma > 0.0) {
        return Err(SepError::DegenerateSigma);
    }
    let h = 1.0 / m as f64;
    let dt = t / steps as f64;
    let r = 0.5 * sigma * dt / (h * h);
    let mut u: Vec<f64> = (0..m).map(|i| initial((i as f64 + 0.5) * h)).collect();
    // (1 + r) u_i - (r/2)(u_{i-1} + u_{i+1}) = rhs, periodic
    let (a, b) = (1.0 + r, -0.5 * r);
    for _ in 0..steps {
        let rhs: Vec<f64> = (0..m)
            .map(|i| (1.0 - r) * u[i] + 0.5 * r * (u[(i + m - 1) % m] + u[(i + 1) % m]))
            .collect();
        u = solve_cyclic(a, b, &rhs);
    }
    Ok(u)
}

/// Solves the symmetric cyclic tridiagonal system with diagonal `a` and
/// off-diagonals `b` by Sherman-Morrison.
fn solve_cyclic(a: f64, b: f64, rhs: &[f64]) -> Vec<f64> {
    let m = rhs.len();
    let gamma = -a;
    let mut diag = vec![a; m];
    diag[0] = a - gamma;
    diag[m - 1] = a - b * b / gamma;
    let x = solve_tridiagonal(&diag, b, rhs);
    let mut uvec = vec![0.0; m];
    uvec[0] = gamma;
    uvec[m - 1] = b;
    let z = solve_tridiagonal(&diag, b, &uvec);
    let fact = (x[0] + b * x[m - 1] / gamma) / (1.0 + z[0] + b * z[m - 1] / gamma);
    x.iter().zip(&z).map(|(xi, zi)| xi - fact * zi).collect()
}

fn solve_tridiagonal(diag: &[f64], off: f64, rhs: &[f64]) -> Vec<f64> {
    let m = rhs.len();
    let mut c = vec![0.0; m];
    let mut d = vec![0.0; m];
    c[0] = off / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..m {
        let den = diag[i] - off * c[i - 1];
        c[i] = off / den;
        d[i] = (rhs[i] - off * d[i - 1]) / den;
    }
    let mut x = vec![0.0; m];
    x[m - 1] = d[m - 1];
    for i in (0..m - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_exact_for_polynomials() {
        let (x, w) = gauss_legendre(8);
        for p in 0..16 {
            let q: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(p)).sum();
            let exact = if p % 2 == 1 { 0.0 } else { 2.0 / (p as f64 + 1.0) };
            assert!((q - exact).abs() < 1e-14, "degree {p}");
        }
    }

    #[test]
    fn heat_kernel_density_integrates_to_one() {
        let sigma = vec![vec![2.0, 0.3], vec![0.3, 1.0]];
        let mass = integrate_box(
            |u| heat_kernel_density(&sigma, 0.05, u, &[1.0, 1.0]).unwrap(),
            &[-0.5, -0.5],
            &[0.5, 0.5],
            16,
            8,
        );
        assert!((mass - 1.0).abs() < 1e-10);
    }

    #[test]
    fn gaussian_semigroup_conserves_mass_and_matches_t0() {
        let g = TestFunction::gaussian_bump(vec![0.4], 0.05, 1.3);
        let sigma = vec![vec![2.37]];
        let s0 = GaussianSemigroup::new(&g, &sigma, 0.0, &[1.0]).unwrap();
        for u in [0.0, 0.3, 0.41, 0.9] {
            assert!((s0.eval(&[u]) - g.eval(&[u])).abs() < 1e-12);
        }
        let st = GaussianSemigroup::new(&g, &sigma, 0.02, &[1.0]).unwrap();
        let mass = integrate_box(|u| st.eval(u), &[0.0], &[1.0], 64, 8);
        assert!((mass - g.integral()).abs() < 1e-10);
    }

    #[test]
    fn degenerate_sigma_rejected() {
        let g = TestFunction::gaussian_bump(vec![0.4, 0.4], 0.05, 1.0);
        let sigma = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        assert!(matches!(
            GaussianSemigroup::new(&g, &sigma, 1.0, &[1.0, 1.0]),
            Err(SepError::DegenerateSigma)
        ));
    }

    #[test]
    fn crank_nicolson_decays_fourier_mode() {
        let sigma = 2.0;
        let t = 0.01;
        let m = 512;
        let u = crank_nicolson_1d(|x| (2.0 * std::f64::consts::PI * x).sin(), sigma, t, m, 200).unwrap();
        let decay = (-2.0 * std::f64::consts::PI.powi(2) * sigma * t).exp();
        for (i, v) in u.iter().enumerate() {
            let x = (i as f64 + 0.5) / m as f64;
            assert!((v - decay * (2.0 * std::f64::consts::PI * x).sin()).abs() < 1e-4);
        }
    }
}
