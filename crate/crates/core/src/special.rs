//! Error function, Gaussian quadrature rules and adaptive Gaussian averages.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use crate::eigen::eigenvalues;
use crate::error::{Error, Result};
use crate::lattice::Tridiagonal;

pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Nonnegative half of an n-point Gauss–Hermite rule for ∫ e^{−x²} f(x) dx.
/// Nodes descend; for odd n the last node is 0 and carries its full weight,
/// every other weight stands for the mirrored pair.
#[derive(Debug, Clone)]
pub struct HermiteRule {
    pub n: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

const LOG_SCALE: f64 = 1e150;

fn hermite_nodes(n: usize) -> Result<HermiteRule> {
    if n == 0 {
        return Err(Error::InvalidArgument("Gauss-Hermite rule needs n >= 1".into()));
    }
    let pim4 = PI.powf(-0.25);
    let m = n.div_ceil(2);
    let nf = n as f64;
    let mut x: Vec<f64> = Vec::with_capacity(m);
    let mut w = Vec::with_capacity(m);
    let sq: Vec<(f64, f64)> = (1..=n)
        .map(|j| ((2.0 / j as f64).sqrt(), ((j as f64 - 1.0) / j as f64).sqrt()))
        .collect();
    let ln_scale = LOG_SCALE.ln();
    // Golub–Welsch starting values, polished by Newton on the recurrence
    let jacobi = Tridiagonal::new(vec![0.0; n], (1..n).map(|j| (j as f64 / 2.0).sqrt()).collect())?;
    let start = eigenvalues(&jacobi)?;
    for i in 0..m {
        let mut z = start[n - 1 - i];
        if n % 2 == 1 && i == m - 1 {
            z = 0.0;
        }
        let mut converged = false;
        let mut log_pp = 0.0;
        for _ in 0..20 {
            let (mut p1, mut p2) = (pim4, 0.0);
            let mut ls = 0.0;
            for &(a, b) in &sq {
                let p3 = p2;
                p2 = p1;
                p1 = z * a * p2 - b * p3;
                if p1.abs() > LOG_SCALE {
                    p1 /= LOG_SCALE;
                    p2 /= LOG_SCALE;
                    ls += ln_scale;
                }
            }
            let pp = (2.0 * nf).sqrt() * p2;
            log_pp = pp.abs().ln() + ls;
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() <= 1e-14 * z.abs().max(1.0) {
                converged = true;
                break;
            }
        }
        if !converged || !z.is_finite() {
            return Err(Error::Numerical(format!("Gauss-Hermite node {i} of {n} did not converge")));
        }
        let wi = (2f64.ln() - 2.0 * log_pp).exp();
        x.push(z);
        w.push(wi);
    }
    if x.windows(2).any(|p| !(p[1] < p[0])) || x.iter().any(|&v| v < 0.0) {
        return Err(Error::Numerical(format!("Gauss-Hermite nodes for n = {n} are not ordered")));
    }
    let total: f64 = x
        .iter()
        .zip(&w)
        .map(|(&xi, &wi)| if xi == 0.0 { wi } else { 2.0 * wi })
        .sum();
    if ((total - PI.sqrt()) / PI.sqrt()).abs() > 1e-11 {
        return Err(Error::Numerical(format!("Gauss-Hermite weights for n = {n} sum to {total}")));
    }
    Ok(HermiteRule { n, nodes: x, weights: w })
}

/// Cached Gauss–Hermite rule.
pub fn gauss_hermite(n: usize) -> Result<Arc<HermiteRule>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<HermiteRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(r) = cache.lock().expect("quadrature cache poisoned").get(&n) {
        return Ok(r.clone());
    }
    let rule = Arc::new(hermite_nodes(n)?);
    cache
        .lock()
        .expect("quadrature cache poisoned")
        .insert(n, rule.clone());
    Ok(rule)
}

impl HermiteRule {
    /// ∫ e^{−x²} f(x) dx for even f.
    pub fn integrate_even(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| if x == 0.0 { w * f(x) } else { 2.0 * w * f(x) })
            .sum()
    }
}

/// n-point Gauss–Legendre rule on [−1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 1.0;
        for _ in 0..100 {
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j - 1) as f64 * z * p2 - (j - 1) as f64 * p3) / j as f64;
            }
            pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

fn legendre16() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(16))
}

/// Method that produced a converged Gaussian average.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadratureMethod {
    GaussHermite { nodes: usize },
    CompositeLegendre { panels: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSettings {
    /// Absolute tolerance between successive refinements.
    pub tol: f64,
    pub max_hermite: usize,
    pub min_hermite: usize,
    /// Upper limit on composite Gauss–Legendre panels.
    pub max_panels: usize,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_hermite: 8192,
            min_hermite: 64,
            max_panels: 1 << 18,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianAverage {
    pub values: Vec<f64>,
    /// Max difference between the last two refinements.
    pub error: f64,
    pub method: QuadratureMethod,
}

/// Standard normal density cut-off for the composite rule: φ(Z_MAX) ≈ 1e−18.
const Z_MAX: f64 = 9.0;

/// E[f(s·Z)] for Z ~ N(0, 1) and f even, evaluated componentwise for a
/// vector-valued f that writes `dim` outputs. `phase_rate` bounds how fast the
/// integrand oscillates in its argument (radians per unit).
///
/// Gauss–Hermite with node doubling is tried first; if the expected
/// oscillation is beyond what `max_hermite` nodes can resolve, or doubling
/// fails to settle, a composite 16-point Gauss–Legendre rule on [0, 9] in units
/// of the standard deviation is refined by panel doubling.
pub fn even_gaussian_average<F>(
    mut f: F,
    s: f64,
    phase_rate: f64,
    dim: usize,
    settings: &QuadratureSettings,
) -> Result<GaussianAverage>
where
    F: FnMut(f64, &mut [f64]),
{
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::InvalidArgument(format!("Gaussian average needs s > 0, got {s}")));
    }
    let mut buf = vec![0.0; dim];
    // oscillation rate in Hermite variable x = z/√2
    let omega_x = std::f64::consts::SQRT_2 * s * phase_rate.abs();
    let mut last_err = f64::INFINITY;

    if omega_x * omega_x <= settings.max_hermite as f64 {
        let mut n = settings.min_hermite.max((omega_x * omega_x / 2.0).ceil() as usize).next_power_of_two();
        let mut prev: Option<Vec<f64>> = None;
        while n <= settings.max_hermite {
            let rule = gauss_hermite(n)?;
            let mut acc = vec![0.0; dim];
            for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
                let wx = if x == 0.0 { w } else { 2.0 * w } / PI.sqrt();
                f(std::f64::consts::SQRT_2 * s * x, &mut buf);
                for (a, b) in acc.iter_mut().zip(&buf) {
                    *a += wx * b;
                }
            }
            if let Some(p) = &prev {
                let diff = max_diff(p, &acc);
                last_err = diff;
                if diff < settings.tol {
                    return Ok(GaussianAverage {
                        values: acc,
                        error: diff,
                        method: QuadratureMethod::GaussHermite { nodes: n },
                    });
                }
            }
            prev = Some(acc);
            n *= 2;
        }
    }

    let (gx, gw) = legendre16();
    let min_panels = ((s * phase_rate.abs() * Z_MAX / PI).ceil() as usize).max(8);
    let mut panels = min_panels;
    let mut prev: Option<Vec<f64>> = None;
    let norm = (2.0 / PI).sqrt();
    while panels <= settings.max_panels {
        let h = Z_MAX / panels as f64;
        let mut acc = vec![0.0; dim];
        for p in 0..panels {
            let mid = (p as f64 + 0.5) * h;
            for (&xi, &wi) in gx.iter().zip(gw) {
                let z = mid + 0.5 * h * xi;
                let wz = 0.5 * h * wi * norm * (-0.5 * z * z).exp();
                f(s * z, &mut buf);
                for (a, b) in acc.iter_mut().zip(&buf) {
                    *a += wz * b;
                }
            }
        }
        if let Some(p) = &prev {
            let diff = max_diff(p, &acc);
            last_err = diff;
            if diff < settings.tol {
                return Ok(GaussianAverage {
                    values: acc,
                    error: diff,
                    method: QuadratureMethod::CompositeLegendre { panels },
                });
            }
        }
        prev = Some(acc);
        panels *= 2;
    }
    Err(Error::QuadratureNoConvergence {
        t: phase_rate,
        achieved: last_err,
        wanted: settings.tol,
    })
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Golden-section search for a minimum of a unimodal function on [a, b].
pub fn golden_min(mut f: impl FnMut(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}
