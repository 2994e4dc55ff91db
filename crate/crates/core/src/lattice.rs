//! Disordered tight-binding chains: problem definition, disorder sampling and
//! the Hamiltonian in tridiagonal storage.
//!
//! Energies are in units of |J|, distances in lattice constants.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Boundary condition of the chain. Only open chains are modelled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Boundary {
    #[default]
    Open,
}

/// Static problem definition of a disordered chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    n_sites: usize,
    coupling: f64,
    disorder_sigma: f64,
    boundary: Boundary,
}

impl LatticeSpec {
    pub fn new(n_sites: usize, coupling: f64, disorder_sigma: f64) -> Result<Self> {
        if n_sites < 2 {
            return Err(Error::InvalidSpec(format!("n_sites must be >= 2, got {n_sites}")));
        }
        if !coupling.is_finite() || coupling == 0.0 {
            return Err(Error::InvalidSpec(format!("coupling must be finite and nonzero, got {coupling}")));
        }
        if !disorder_sigma.is_finite() || disorder_sigma < 0.0 {
            return Err(Error::InvalidSpec(format!(
                "disorder_sigma must be finite and >= 0, got {disorder_sigma}"
            )));
        }
        Ok(Self {
            n_sites,
            coupling,
            disorder_sigma,
            boundary: Boundary::Open,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    pub fn disorder_sigma(&self) -> f64 {
        self.disorder_sigma
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// Same lattice with a different disorder strength.
    pub fn with_sigma(&self, disorder_sigma: f64) -> Result<Self> {
        Self::new(self.n_sites, self.coupling, disorder_sigma)
    }

    pub fn center(&self) -> usize {
        self.n_sites / 2
    }
}

/// One sampled vector of site energies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisorderRealization {
    pub energies: Vec<f64>,
    /// Seed of the realization's private random stream.
    pub seed: u64,
    /// Position in the ensemble.
    pub index: u64,
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive the seed of stream `index` under `master_seed`. Pure function of both
/// arguments, so realizations do not depend on evaluation order.
pub fn derive_seed(master_seed: u64, index: u64) -> u64 {
    mix64(master_seed ^ mix64(index.wrapping_mul(0xD1B5_4A32_D192_ED03)))
}

/// Draw the i.i.d. Gaussian site energies of realization `index`.
pub fn sample_disorder(spec: &LatticeSpec, master_seed: u64, index: u64) -> DisorderRealization {
    let seed = derive_seed(master_seed, index);
    let energies = if spec.disorder_sigma == 0.0 {
        vec![0.0; spec.n_sites]
    } else {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        (0..spec.n_sites)
            .map(|_| spec.disorder_sigma * rng.sample::<f64, _>(StandardNormal))
            .collect()
    };
    DisorderRealization { energies, seed, index }
}

/// Real symmetric tridiagonal matrix: `diag[n]` on the diagonal and `off[n]`
/// coupling sites n and n+1.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl Tridiagonal {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Result<Self> {
        if diag.is_empty() || off.len() + 1 != diag.len() {
            return Err(Error::DimensionMismatch {
                expected: diag.len().saturating_sub(1),
                got: off.len(),
            });
        }
        Ok(Self { diag, off })
    }

    /// Uniform chain with on-site energies `diag` and hopping `coupling`.
    pub fn chain(diag: Vec<f64>, coupling: f64) -> Self {
        let off = vec![coupling; diag.len().saturating_sub(1)];
        Self { diag, off }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            self.diag[i]
        } else if i + 1 == j {
            self.off[i]
        } else if j + 1 == i {
            self.off[j]
        } else {
            0.0
        }
    }

    /// Dense row-major copy.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.dim();
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            m[i * n + i] = self.diag[i];
        }
        for (i, &v) in self.off.iter().enumerate() {
            m[i * n + i + 1] = v;
            m[(i + 1) * n + i] = v;
        }
        m
    }

    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        let n = self.dim();
        for i in 0..n {
            let mut acc = self.diag[i] * x[i];
            if i > 0 {
                acc += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                acc += self.off[i] * x[i + 1];
            }
            out[i] = acc;
        }
    }

    pub fn apply_complex(&self, x: &[Complex64], out: &mut [Complex64]) {
        let n = self.dim();
        for i in 0..n {
            let mut acc = x[i] * self.diag[i];
            if i > 0 {
                acc += x[i - 1] * self.off[i - 1];
            }
            if i + 1 < n {
                acc += x[i + 1] * self.off[i];
            }
            out[i] = acc;
        }
    }

    /// Max absolute row sum, an upper bound on the spectral radius.
    pub fn norm_inf(&self) -> f64 {
        (0..self.dim())
            .map(|i| {
                let mut s = self.diag[i].abs();
                if i > 0 {
                    s += self.off[i - 1].abs();
                }
                if i < self.off.len() {
                    s += self.off[i].abs();
                }
                s
            })
            .fold(0.0, f64::max)
    }
}

/// Anderson Hamiltonian of one realization on an open chain.
pub fn build_hamiltonian(spec: &LatticeSpec, realization: &DisorderRealization) -> Result<Tridiagonal> {
    if realization.energies.len() != spec.n_sites {
        return Err(Error::DimensionMismatch {
            expected: spec.n_sites,
            got: realization.energies.len(),
        });
    }
    Ok(Tridiagonal::chain(realization.energies.clone(), spec.coupling))
}
