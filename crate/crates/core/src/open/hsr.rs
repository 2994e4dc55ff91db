//! Site-basis propagation of ρ̇ = −i[H, ρ] − Γ ρ_H, where ρ_H is ρ with its
//! diagonal removed (pure dephasing by site projectors).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::closed::{check_times, DiffusivityTrace, MomentTrace};
use crate::error::{Error, Result};
use crate::lattice::Tridiagonal;
use crate::ode::{integrate, OdeOptions, OdeStats};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HsrParams {
    pub gamma: f64,
}

impl HsrParams {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidArgument(format!("dephasing rate must be >= 0, got {gamma}")));
        }
        Ok(Self { gamma })
    }
}

/// Density matrices on a time grid, each row-major N×N.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrixTrace {
    pub times: Vec<f64>,
    pub n: usize,
    pub matrices: Vec<Vec<Complex64>>,
}

impl DensityMatrixTrace {
    pub fn populations(&self, ti: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.matrices[ti][i * self.n + i].re).collect()
    }
}

/// |n0⟩⟨n0|
pub fn site_projector(n: usize, n0: usize) -> Vec<Complex64> {
    let mut rho = vec![ZERO; n * n];
    rho[n0 * n + n0] = Complex64::new(1.0, 0.0);
    rho
}

/// |ψ⟩⟨ψ|
pub fn pure_state(psi: &[Complex64]) -> Vec<Complex64> {
    let n = psi.len();
    let mut rho = vec![ZERO; n * n];
    for i in 0..n {
        for j in 0..n {
            rho[i * n + j] = psi[i] * psi[j].conj();
        }
    }
    rho
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityInvariants {
    pub trace_error: f64,
    pub hermiticity_error: f64,
    pub min_eigenvalue: f64,
}

pub fn density_invariants(rho: &[Complex64], n: usize) -> DensityInvariants {
    let mut tr = ZERO;
    let mut herm = 0.0f64;
    for i in 0..n {
        tr += rho[i * n + i];
        for j in 0..n {
            herm = herm.max((rho[i * n + j] - rho[j * n + i].conj()).norm());
        }
    }
    let m = DMatrix::from_fn(n, n, |i, j| 0.5 * (rho[i * n + j] + rho[j * n + i].conj()));
    let min_eigenvalue = m.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min);
    DensityInvariants {
        trace_error: (tr - Complex64::new(1.0, 0.0)).norm(),
        hermiticity_error: herm,
        min_eigenvalue,
    }
}

fn validate_rho(rho: &[Complex64], n: usize) -> Result<()> {
    if rho.len() != n * n {
        return Err(Error::DimensionMismatch {
            expected: n * n,
            got: rho.len(),
        });
    }
    let inv = density_invariants(rho, n);
    if inv.trace_error > 1e-10 || inv.hermiticity_error > 1e-10 || inv.min_eigenvalue < -1e-10 {
        return Err(Error::InvalidArgument(format!(
            "initial density matrix invalid: trace error {:e}, hermiticity error {:e}, min eigenvalue {:e}",
            inv.trace_error, inv.hermiticity_error, inv.min_eigenvalue
        )));
    }
    Ok(())
}

/// out = −i[H, ρ] − Γ ρ_H for tridiagonal H.
pub fn lindblad_rhs(h: &Tridiagonal, gamma: f64, rho: &[Complex64], out: &mut [Complex64]) {
    let n = h.dim();
    let (d, e) = (&h.diag, &h.off);
    for i in 0..n {
        for j in 0..n {
            let idx = i * n + j;
            // [H, ρ]_ij
            let mut c = rho[idx] * (d[i] - d[j]);
            if i > 0 {
                c += rho[idx - n] * e[i - 1];
            }
            if i + 1 < n {
                c += rho[idx + n] * e[i];
            }
            if j > 0 {
                c -= rho[idx - 1] * e[j - 1];
            }
            if j + 1 < n {
                c -= rho[idx + 1] * e[j];
            }
            let mut v = Complex64::new(c.im, -c.re);
            if i != j {
                v -= rho[idx] * gamma;
            }
            out[idx] = v;
        }
    }
}

/// Run the site-basis integrator and hand each output state to `observe`.
pub fn lindblad_observe<O>(
    h: &Tridiagonal,
    params: &HsrParams,
    rho0: &[Complex64],
    times: &[f64],
    opts: &OdeOptions,
    observe: O,
) -> Result<OdeStats>
where
    O: FnMut(usize, f64, &[Complex64]) -> Result<()>,
{
    check_times(times)?;
    validate_rho(rho0, h.dim())?;
    let gamma = params.gamma;
    integrate(|_, y, dy| lindblad_rhs(h, gamma, y, dy), 0.0, rho0, times, opts, observe)
}

pub fn lindblad_propagate(
    h: &Tridiagonal,
    params: &HsrParams,
    rho0: &[Complex64],
    times: &[f64],
    opts: &OdeOptions,
) -> Result<DensityMatrixTrace> {
    let mut matrices = Vec::with_capacity(times.len());
    lindblad_observe(h, params, rho0, times, opts, |_, _, rho| {
        matrices.push(rho.to_vec());
        Ok(())
    })?;
    Ok(DensityMatrixTrace {
        times: times.to_vec(),
        n: h.dim(),
        matrices,
    })
}

/// (⟨n⟩, ⟨n²⟩, d⟨n⟩/dt, d⟨n²⟩/dt) about `origin`. Only −i[H, ρ] feeds the
/// populations, so dρ_nn/dt = 2 Im (Hρ)_nn.
pub fn rho_moments(h: &Tridiagonal, rho: &[Complex64], origin: usize) -> [f64; 4] {
    let n = h.dim();
    let (d, e) = (&h.diag, &h.off);
    let mut m = [0.0; 4];
    for i in 0..n {
        let x = i as f64 - origin as f64;
        let p = rho[i * n + i].re;
        let mut z = rho[i * n + i] * d[i];
        if i > 0 {
            z += rho[(i - 1) * n + i] * e[i - 1];
        }
        if i + 1 < n {
            z += rho[(i + 1) * n + i] * e[i];
        }
        let dp = 2.0 * z.im;
        m[0] += x * p;
        m[1] += x * x * p;
        m[2] += x * dp;
        m[3] += x * x * dp;
    }
    m
}

/// Moments of the open-system trajectory without storing density matrices.
pub fn open_moments(
    h: &Tridiagonal,
    params: &HsrParams,
    rho0: &[Complex64],
    origin: usize,
    times: &[f64],
    opts: &OdeOptions,
    edge_threshold: Option<f64>,
) -> Result<MomentTrace> {
    let nt = times.len();
    let n = h.dim();
    let mut out = MomentTrace {
        times: times.to_vec(),
        m1: vec![0.0; nt],
        m2: vec![0.0; nt],
        dm1: vec![0.0; nt],
        dm2: vec![0.0; nt],
        ..Default::default()
    };
    lindblad_observe(h, params, rho0, times, opts, |i, _, rho| {
        let m = rho_moments(h, rho, origin);
        out.m1[i] = m[0];
        out.m2[i] = m[1];
        out.dm1[i] = m[2];
        out.dm2[i] = m[3];
        let edge = rho[0].re.max(rho[n * n - 1].re);
        out.max_edge_population = out.max_edge_population.max(edge);
        Ok(())
    })?;
    if let Some(threshold) = edge_threshold {
        if out.max_edge_population > threshold {
            return Err(Error::BoundaryReached {
                population: out.max_edge_population,
                threshold,
            });
        }
    }
    Ok(out)
}

/// D(t) and variance from a stored trace.
pub fn diffusivity_from_rho(trace: &DensityMatrixTrace, h: &Tridiagonal, origin: usize) -> DiffusivityTrace {
    let mut d_values = Vec::with_capacity(trace.times.len());
    let mut msd = Vec::with_capacity(trace.times.len());
    for rho in &trace.matrices {
        let m = rho_moments(h, rho, origin);
        d_values.push(0.5 * (m[3] - 2.0 * m[0] * m[2]));
        msd.push(m[1] - m[0] * m[0]);
    }
    DiffusivityTrace {
        times: trace.times.clone(),
        d_values,
        msd,
    }
}

/// Liouvillian on row-major vec(ρ).
pub fn superoperator(h: &Tridiagonal, gamma: f64) -> DMatrix<Complex64> {
    let n = h.dim();
    let hd = DMatrix::from_fn(n, n, |i, j| h.get(i, j));
    let mut l = DMatrix::from_element(n * n, n * n, ZERO);
    let mi = Complex64::new(0.0, -1.0);
    for i in 0..n {
        for j in 0..n {
            let row = i * n + j;
            for k in 0..n {
                // −i H_ik ρ_kj
                l[(row, k * n + j)] += mi * hd[(i, k)];
                // +i ρ_ik H_kj
                l[(row, i * n + k)] -= mi * hd[(k, j)];
            }
            if i != j {
                l[(row, row)] -= Complex64::new(gamma, 0.0);
            }
        }
    }
    l
}

/// Exact ρ(t) = exp(L t) ρ₀ by dense matrix exponential; for N ≤ 8 only.
pub fn superoperator_propagate(h: &Tridiagonal, params: &HsrParams, rho0: &[Complex64], times: &[f64]) -> Result<DensityMatrixTrace> {
    let n = h.dim();
    if n > 8 {
        return Err(Error::InvalidArgument(format!("superoperator path limited to N <= 8, got {n}")));
    }
    check_times(times)?;
    validate_rho(rho0, n)?;
    let l = superoperator(h, params.gamma);
    let v0 = DVector::from_column_slice(rho0);
    let matrices = times
        .iter()
        .map(|&t| {
            let p = (&l * Complex64::new(t, 0.0)).exp();
            (p * &v0).as_slice().to_vec()
        })
        .collect();
    Ok(DensityMatrixTrace {
        times: times.to_vec(),
        n,
        matrices,
    })
}
