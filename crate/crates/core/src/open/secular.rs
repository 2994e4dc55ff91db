//! Secular (Pauli) limit: eigenstate populations hop with rates Γ K_ij.
//!
//! ṗ = R p with R = Γ(K − I). R is symmetric, so p(t) = Q e^{Λt} Qᵀ p₀ with
//! the spectral decomposition of R.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::closed::{check_times, MomentTrace, PopulationTrace};
use crate::eigen::Eigensystem;
use crate::error::{Error, Result};
use crate::open::hsr::HsrParams;
use crate::open::kappa::KappaTensor;

/// Row-major R = Γ(K − I).
pub fn rate_matrix(kappa: &KappaTensor, gamma: f64) -> Vec<f64> {
    let n = kappa.dim();
    let mut r: Vec<f64> = kappa.diagonal_block().iter().map(|k| gamma * k).collect();
    for i in 0..n {
        r[i * n + i] -= gamma;
    }
    r
}

#[derive(Debug, Clone)]
pub struct SecularModel {
    n: usize,
    rates: Vec<f64>,
    /// Column a is the eigenvector of rate a.
    q: DMatrix<f64>,
}

impl SecularModel {
    pub fn new(kappa: &KappaTensor, params: &HsrParams) -> Self {
        let n = kappa.dim();
        let r = rate_matrix(kappa, params.gamma);
        let m = DMatrix::from_row_slice(n, n, &r);
        let eig = SymmetricEigen::new(m);
        Self {
            n,
            rates: eig.eigenvalues.as_slice().to_vec(),
            q: eig.eigenvectors,
        }
    }

    /// Spectral coefficients c = Qᵀ p₀.
    fn coefficients(&self, pop0: &[f64]) -> Result<Vec<f64>> {
        if pop0.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: pop0.len(),
            });
        }
        if let Some((i, p)) = pop0.iter().enumerate().find(|(_, p)| **p < 0.0 || !p.is_finite()) {
            return Err(Error::InvalidArgument(format!("negative initial population {p} at eigenstate {i}")));
        }
        Ok((0..self.n)
            .map(|a| (0..self.n).map(|i| self.q[(i, a)] * pop0[i]).sum())
            .collect())
    }

    /// Linear functional Σ_i w_i p_i(t) and its derivative for each time.
    fn functional(&self, c: &[f64], w: &[f64], times: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let proj: Vec<f64> = (0..self.n)
            .map(|a| c[a] * (0..self.n).map(|i| w[i] * self.q[(i, a)]).sum::<f64>())
            .collect();
        let mut v = Vec::with_capacity(times.len());
        let mut dv = Vec::with_capacity(times.len());
        for &t in times {
            let (mut s, mut ds) = (0.0, 0.0);
            for a in 0..self.n {
                let e = proj[a] * (self.rates[a] * t).exp();
                s += e;
                ds += self.rates[a] * e;
            }
            v.push(s);
            dv.push(ds);
        }
        (v, dv)
    }

    pub fn populations(&self, pop0: &[f64], times: &[f64]) -> Result<PopulationTrace> {
        check_times(times)?;
        let c = self.coefficients(pop0)?;
        let n = self.n;
        let mut populations = Vec::with_capacity(n * times.len());
        for &t in times {
            let ca: Vec<f64> = (0..n).map(|a| c[a] * (self.rates[a] * t).exp()).collect();
            for i in 0..n {
                populations.push((0..n).map(|a| self.q[(i, a)] * ca[a]).sum());
            }
        }
        Ok(PopulationTrace {
            times: times.to_vec(),
            populations,
            n_sites: n,
        })
    }
}

/// Eigenstate populations p_i(t) under the secular rate equation.
pub fn secular_propagate(es: &Eigensystem, params: &HsrParams, pop0: &[f64], times: &[f64]) -> Result<PopulationTrace> {
    let kappa = crate::open::kappa::kappa_tensor(es);
    SecularModel::new(&kappa, params).populations(pop0, times)
}

/// Site populations P(n) = Σ_i U_in² p_i.
pub fn site_populations(es: &Eigensystem, eigen_pops: &[f64]) -> Vec<f64> {
    let n = es.dim();
    let mut out = vec![0.0; n];
    for (i, &p) in eigen_pops.iter().enumerate() {
        for (o, u) in out.iter_mut().zip(es.row(i)) {
            *o += u * u * p;
        }
    }
    out
}

/// Initial eigenstate populations of the site state |n0⟩: p_i = U_{i,n0}².
pub fn eigen_populations_of_site(es: &Eigensystem, n0: usize) -> Vec<f64> {
    (0..es.dim()).map(|i| es.u(i, n0).powi(2)).collect()
}

/// Site-position moments (about `origin`) of the secular dynamics.
pub fn secular_moments(es: &Eigensystem, params: &HsrParams, pop0: &[f64], origin: usize, times: &[f64]) -> Result<MomentTrace> {
    check_times(times)?;
    let kappa = crate::open::kappa::kappa_tensor(es);
    let model = SecularModel::new(&kappa, params);
    let c = model.coefficients(pop0)?;
    let n = es.dim();
    let (mut w1, mut w2) = (vec![0.0; n], vec![0.0; n]);
    for i in 0..n {
        for (site, u) in es.row(i).iter().enumerate() {
            let x = site as f64 - origin as f64;
            w1[i] += u * u * x;
            w2[i] += u * u * x * x;
        }
    }
    let (m1, dm1) = model.functional(&c, &w1, times);
    let (m2, dm2) = model.functional(&c, &w2, times);
    Ok(MomentTrace {
        times: times.to_vec(),
        m1,
        m2,
        dm1,
        dm2,
        ..Default::default()
    })
}
