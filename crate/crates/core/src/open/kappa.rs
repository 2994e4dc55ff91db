//! Eigenbasis form of the dephasing equation and the κ coefficients
//! κ_{kl}^{(ij)} = Σ_m U_im U_jm U_km U_lm.

use num_complex::Complex64;

use crate::closed::check_times;
use crate::eigen::Eigensystem;
use crate::error::{Error, Result};
use crate::ode::{integrate, OdeOptions};
use crate::open::hsr::{DensityMatrixTrace, HsrParams};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Diagonal block K_ij = κ_{jj}^{(ii)} = Σ_m U_im² U_jm², plus on-demand access
/// to the full tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct KappaTensor {
    n: usize,
    k: Vec<f64>,
    u: Vec<f64>,
}

pub fn kappa_tensor(es: &Eigensystem) -> KappaTensor {
    let n = es.dim();
    let sq: Vec<f64> = es.eigenvectors.iter().map(|x| x * x).collect();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v: f64 = (0..n).map(|m| sq[i * n + m] * sq[j * n + m]).sum();
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    KappaTensor {
        n,
        k,
        u: es.eigenvectors.clone(),
    }
}

impl KappaTensor {
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Row-major K.
    pub fn diagonal_block(&self) -> &[f64] {
        &self.k
    }

    pub fn k(&self, i: usize, j: usize) -> f64 {
        self.k[i * self.n + j]
    }

    pub fn element(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let n = self.n;
        (0..n)
            .map(|m| self.u[i * n + m] * self.u[j * n + m] * self.u[k * n + m] * self.u[l * n + m])
            .sum()
    }

    /// Σ_i K_ij for every j.
    pub fn column_sums(&self) -> Vec<f64> {
        let n = self.n;
        (0..n).map(|j| (0..n).map(|i| self.k[i * n + j]).sum()).collect()
    }

    /// Full tensor indexed [((i·N + j)·N + k)·N + l]; O(N⁴) memory.
    pub fn full(&self) -> Result<Vec<f64>> {
        let n = self.n;
        if n > 32 {
            return Err(Error::InvalidArgument(format!("full kappa tensor limited to N <= 32, got {n}")));
        }
        let mut out = vec![0.0; n * n * n * n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        out[((i * n + j) * n + k) * n + l] = self.element(i, j, k, l);
                    }
                }
            }
        }
        Ok(out)
    }
}

/// ρ̃ = U ρ Uᵀ
pub fn to_eigenbasis(es: &Eigensystem, rho: &[Complex64]) -> Vec<Complex64> {
    let n = es.dim();
    let u = &es.eigenvectors;
    let mut tmp = vec![ZERO; n * n];
    for a in 0..n {
        for j in 0..n {
            let mut acc = ZERO;
            for b in 0..n {
                acc += rho[b * n + j] * u[a * n + b];
            }
            tmp[a * n + j] = acc;
        }
    }
    let mut out = vec![ZERO; n * n];
    for a in 0..n {
        for c in 0..n {
            let mut acc = ZERO;
            for j in 0..n {
                acc += tmp[a * n + j] * u[c * n + j];
            }
            out[a * n + c] = acc;
        }
    }
    out
}

/// ρ = Uᵀ ρ̃ U
pub fn to_site_basis(es: &Eigensystem, rho_eig: &[Complex64]) -> Vec<Complex64> {
    let n = es.dim();
    let u = &es.eigenvectors;
    let mut tmp = vec![ZERO; n * n];
    for i in 0..n {
        for l in 0..n {
            let mut acc = ZERO;
            for k in 0..n {
                acc += rho_eig[k * n + l] * u[k * n + i];
            }
            tmp[i * n + l] = acc;
        }
    }
    let mut out = vec![ZERO; n * n];
    for i in 0..n {
        for m in 0..n {
            let mut acc = ZERO;
            for l in 0..n {
                acc += tmp[i * n + l] * u[l * n + m];
            }
            out[i * n + m] = acc;
        }
    }
    out
}

/// out_ij = (−iω_ij − Γ) ρ̃_ij + Γ [U diag(Uᵀ ρ̃ U) Uᵀ]_ij
pub fn eigenbasis_rhs(es: &Eigensystem, gamma: f64, rho: &[Complex64], out: &mut [Complex64], scratch: &mut [Complex64]) {
    let n = es.dim();
    let u = &es.eigenvectors;
    let lam = &es.eigenvalues;
    // scratch = ρ̃ U
    for k in 0..n {
        for m in 0..n {
            let mut acc = ZERO;
            for l in 0..n {
                acc += rho[k * n + l] * u[l * n + m];
            }
            scratch[k * n + m] = acc;
        }
    }
    // site populations q_m = Σ_k U_km (ρ̃U)_km
    let mut q = vec![ZERO; n];
    for (m, qm) in q.iter_mut().enumerate() {
        let mut acc = ZERO;
        for k in 0..n {
            acc += scratch[k * n + m] * u[k * n + m];
        }
        *qm = acc;
    }
    for i in 0..n {
        for j in 0..n {
            let mut acc = ZERO;
            for m in 0..n {
                acc += q[m] * (u[i * n + m] * u[j * n + m]);
            }
            let w = lam[i] - lam[j];
            let r = rho[i * n + j];
            out[i * n + j] = Complex64::new(r.im * w, -r.re * w) - r * gamma + acc * gamma;
        }
    }
}

/// Integrate the eigenbasis equations; the returned matrices are ρ̃(t).
pub fn eigenbasis_propagate(
    es: &Eigensystem,
    params: &HsrParams,
    rho0_eig: &[Complex64],
    times: &[f64],
    opts: &OdeOptions,
) -> Result<DensityMatrixTrace> {
    check_times(times)?;
    let n = es.dim();
    if rho0_eig.len() != n * n {
        return Err(Error::DimensionMismatch {
            expected: n * n,
            got: rho0_eig.len(),
        });
    }
    let gamma = params.gamma;
    let mut scratch = vec![ZERO; n * n];
    let mut matrices = Vec::with_capacity(times.len());
    integrate(
        |_, y, dy| eigenbasis_rhs(es, gamma, y, dy, &mut scratch),
        0.0,
        rho0_eig,
        times,
        opts,
        |_, _, y| {
            matrices.push(y.to_vec());
            Ok(())
        },
    )?;
    Ok(DensityMatrixTrace {
        times: times.to_vec(),
        n,
        matrices,
    })
}
