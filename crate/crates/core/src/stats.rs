//! One-pass mean and co-moment accumulation with an associative merge.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Means and co-moments of `k` correlated variables at each of `points`
/// independent locations (for example time samples).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoMoments {
    n: u64,
    k: usize,
    points: usize,
    mean: Vec<f64>,
    /// Σ (x_a − x̄_a)(x_b − x̄_b), k×k per point.
    comoment: Vec<f64>,
}

impl CoMoments {
    pub fn new(points: usize, k: usize) -> Self {
        Self {
            n: 0,
            k,
            points,
            mean: vec![0.0; points * k],
            comoment: vec![0.0; points * k * k],
        }
    }

    /// Accumulator holding one observation; `x` is point-major, length points·k.
    pub fn single(points: usize, k: usize, x: &[f64]) -> Result<Self> {
        let mut acc = Self::new(points, k);
        acc.push(x)?;
        Ok(acc)
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn vars(&self) -> usize {
        self.k
    }

    /// Welford update.
    pub fn push(&mut self, x: &[f64]) -> Result<()> {
        let (k, p) = (self.k, self.points);
        if x.len() != p * k {
            return Err(Error::DimensionMismatch {
                expected: p * k,
                got: x.len(),
            });
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite sample at component {i}")));
        }
        self.n += 1;
        let n = self.n as f64;
        let mut delta = vec![0.0; k];
        for pt in 0..p {
            let m = &mut self.mean[pt * k..(pt + 1) * k];
            let xs = &x[pt * k..(pt + 1) * k];
            for a in 0..k {
                delta[a] = xs[a] - m[a];
                m[a] += delta[a] / n;
            }
            let c = &mut self.comoment[pt * k * k..(pt + 1) * k * k];
            for a in 0..k {
                let da = xs[a] - m[a];
                for b in 0..k {
                    c[a * k + b] += delta[b] * da;
                }
            }
        }
        Ok(())
    }

    /// Pairwise combination; exact in exact arithmetic and order-fixed in floating point.
    pub fn merge(&mut self, other: &CoMoments) -> Result<()> {
        if self.k != other.k || self.points != other.points {
            return Err(Error::DimensionMismatch {
                expected: self.points * self.k,
                got: other.points * other.k,
            });
        }
        if other.n == 0 {
            return Ok(());
        }
        if self.n == 0 {
            *self = other.clone();
            return Ok(());
        }
        let (na, nb) = (self.n as f64, other.n as f64);
        let n = na + nb;
        let k = self.k;
        let mut delta = vec![0.0; k];
        for pt in 0..self.points {
            for a in 0..k {
                let i = pt * k + a;
                delta[a] = other.mean[i] - self.mean[i];
                self.mean[i] += delta[a] * nb / n;
            }
            let base = pt * k * k;
            for a in 0..k {
                for b in 0..k {
                    let i = base + a * k + b;
                    self.comoment[i] += other.comoment[i] + delta[a] * delta[b] * na * nb / n;
                }
            }
        }
        self.n += other.n;
        Ok(())
    }

    pub fn mean(&self, point: usize, var: usize) -> f64 {
        self.mean[point * self.k + var]
    }

    /// Sample covariance (n − 1 denominator); zero for fewer than two samples.
    pub fn covariance(&self, point: usize, a: usize, b: usize) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        self.comoment[point * self.k * self.k + a * self.k + b] / (self.n - 1) as f64
    }

    /// Means of one variable across all points.
    pub fn means_of(&self, var: usize) -> Vec<f64> {
        (0..self.points).map(|p| self.mean(p, var)).collect()
    }

    /// Standard error of the mean of one variable across all points.
    pub fn stderr_of(&self, var: usize) -> Vec<f64> {
        (0..self.points).map(|p| self.linear_stderr(p, &[(var, 1.0)])).collect()
    }

    /// Standard error of Σ g_a x̄_a, the first-order error of a smooth function
    /// of the means at one point with gradient entries `grad = [(var, g)]`.
    pub fn linear_stderr(&self, point: usize, grad: &[(usize, f64)]) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let mut v = 0.0;
        for &(a, ga) in grad {
            for &(b, gb) in grad {
                v += ga * gb * self.covariance(point, a, b);
            }
        }
        (v.max(0.0) / self.n as f64).sqrt()
    }
}
