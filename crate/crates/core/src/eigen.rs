//! Symmetric tridiagonal eigensolver (implicit QL with Wilkinson shifts).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::Tridiagonal;

const MAX_SWEEPS: usize = 60;

/// Eigenvalues in ascending order and the orthogonal matrix `U` whose row `k`
/// is the eigenvector of eigenvalue `k`, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Eigensystem {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<f64>,
    n: usize,
}

impl Eigensystem {
    /// Build from parts; `eigenvectors` is row-major N×N with rows as eigenvectors.
    pub fn from_parts(eigenvalues: Vec<f64>, eigenvectors: Vec<f64>) -> Result<Self> {
        let n = eigenvalues.len();
        if eigenvectors.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: eigenvectors.len(),
            });
        }
        Ok(Self {
            eigenvalues,
            eigenvectors,
            n,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Component `site` of eigenvector `k`.
    #[inline]
    pub fn u(&self, k: usize, site: usize) -> f64 {
        self.eigenvectors[k * self.n + site]
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.eigenvectors[k * self.n..(k + 1) * self.n]
    }

    /// max |U Uᵀ − I|
    pub fn orthogonality_error(&self) -> f64 {
        let n = self.n;
        let mut err = 0.0f64;
        for a in 0..n {
            for b in a..n {
                let dot: f64 = self.row(a).iter().zip(self.row(b)).map(|(x, y)| x * y).sum();
                let target = if a == b { 1.0 } else { 0.0 };
                err = err.max((dot - target).abs());
            }
        }
        err
    }

    /// max |Uᵀ Λ U − H|
    pub fn reconstruction_error(&self, h: &Tridiagonal) -> f64 {
        let n = self.n;
        let mut err = 0.0f64;
        for i in 0..n {
            for j in i..n {
                let v: f64 = (0..n).map(|k| self.u(k, i) * self.eigenvalues[k] * self.u(k, j)).sum();
                err = err.max((v - h.get(i, j)).abs());
            }
        }
        err
    }

    /// Smallest spacing between consecutive eigenvalues.
    pub fn min_gap(&self) -> f64 {
        self.eigenvalues
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }

    /// Overlaps ⟨v_k|ψ⟩ for a real or complex site-basis vector.
    pub fn project<T>(&self, psi: &[T]) -> Vec<T>
    where
        T: Copy + Default + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
    {
        (0..self.n)
            .map(|k| {
                self.row(k)
                    .iter()
                    .zip(psi)
                    .fold(T::default(), |acc, (&u, &p)| acc + p * u)
            })
            .collect()
    }
}

/// Diagonalize a real symmetric tridiagonal matrix.
pub fn diagonalize(h: &Tridiagonal) -> Result<Eigensystem> {
    diagonalize_indexed(h, None)
}

/// Eigenvalues only, ascending. O(N²).
pub fn eigenvalues(h: &Tridiagonal) -> Result<Vec<f64>> {
    let mut d = h.diag.clone();
    ql_implicit(&mut d, &h.off, None, None)?;
    if d.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("non-finite eigenvalue".into()));
    }
    d.sort_by(f64::total_cmp);
    Ok(d)
}

/// Implicit QL on (d, off). When `z` is given, rotations are accumulated into
/// its rows, which then hold the eigenvectors.
fn ql_implicit(d: &mut [f64], off: &[f64], mut z: Option<&mut [f64]>, realization: Option<u64>) -> Result<()> {
    let n = d.len();
    let mut e = vec![0.0; n];
    e[..n - 1].copy_from_slice(off);
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > MAX_SWEEPS {
                return Err(Error::EigenNoConvergence {
                    realization,
                    eigenvalue: l,
                });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut underflow = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if let Some(z) = z.as_deref_mut() {
                    let (lo, hi) = z.split_at_mut((i + 1) * n);
                    let zi = &mut lo[i * n..];
                    let zi1 = &mut hi[..n];
                    for k in 0..n {
                        let fz = zi1[k];
                        zi1[k] = s * zi[k] + c * fz;
                        zi[k] = c * zi[k] - s * fz;
                    }
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// As [`diagonalize`], tagging a convergence failure with the ensemble index.
pub fn diagonalize_indexed(h: &Tridiagonal, realization: Option<u64>) -> Result<Eigensystem> {
    let n = h.dim();
    let mut d = h.diag.clone();
    // z[k*n + i]: component i of eigenvector k
    let mut z = vec![0.0; n * n];
    for i in 0..n {
        z[i * n + i] = 1.0;
    }
    ql_implicit(&mut d, &h.off, Some(&mut z), realization)?;

    if d.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("non-finite eigenvalue".into()));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let eigenvalues: Vec<f64> = order.iter().map(|&k| d[k]).collect();
    let mut eigenvectors = Vec::with_capacity(n * n);
    for &k in &order {
        let row = &z[k * n..(k + 1) * n];
        let lead = row.iter().find(|x| x.abs() > 1e-12).copied().unwrap_or(0.0);
        let sign = if lead < 0.0 { -1.0 } else { 1.0 };
        eigenvectors.extend(row.iter().map(|x| sign * x));
    }
    Eigensystem::from_parts(eigenvalues, eigenvectors)
}
