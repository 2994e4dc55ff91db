//! Spatial widths of eigenstates and their histogram.

use serde::{Deserialize, Serialize};

use crate::eigen::Eigensystem;
use crate::error::{Error, Result};

const NEG_VARIANCE_TOL: f64 = 1e-12;

/// Standard deviation of |v_k(n)|² over site index n, for every eigenstate.
pub fn eigenstate_widths(es: &Eigensystem) -> Result<Vec<f64>> {
    let n = es.dim();
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let (mut m1, mut m2) = (0.0, 0.0);
        for (site, u) in es.row(k).iter().enumerate() {
            let p = u * u;
            let x = site as f64;
            m1 += x * p;
            m2 += x * x * p;
        }
        let var = m2 - m1 * m1;
        if var < -NEG_VARIANCE_TOL {
            return Err(Error::Numerical(format!("negative width variance {var:e} for eigenstate {k}")));
        }
        out.push(var.max(0.0).sqrt());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WidthHistogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    /// Number of values that landed in a bin.
    pub total: u64,
    pub underflow: u64,
    pub overflow: u64,
}

impl WidthHistogram {
    /// `n_bins` uniform bins on `[lo, hi]`.
    pub fn uniform_edges(lo: f64, hi: f64, n_bins: usize) -> Vec<f64> {
        let step = (hi - lo) / n_bins as f64;
        (0..=n_bins).map(|i| lo + step * i as f64).collect()
    }

    /// Default binning: 100 bins on [0, 3].
    pub fn default_edges() -> Vec<f64> {
        Self::uniform_edges(0.0, 3.0, 100)
    }

    pub fn centers(&self) -> Vec<f64> {
        self.bin_edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// Histogram normalized to unit area.
    pub fn density(&self) -> Vec<f64> {
        let all = (self.total + self.underflow + self.overflow) as f64;
        self.counts
            .iter()
            .zip(self.bin_edges.windows(2))
            .map(|(&c, w)| if all > 0.0 { c as f64 / (all * (w[1] - w[0])) } else { 0.0 })
            .collect()
    }

    pub fn merge(&mut self, other: &WidthHistogram) -> Result<()> {
        if self.bin_edges != other.bin_edges {
            return Err(Error::InvalidArgument("histogram bin edges differ".into()));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.total += other.total;
        self.underflow += other.underflow;
        self.overflow += other.overflow;
        Ok(())
    }
}

/// Bin `widths`; bins are half-open `[e_i, e_{i+1})` except the last, which is closed.
pub fn width_histogram(widths: &[f64], bin_edges: &[f64]) -> Result<WidthHistogram> {
    if bin_edges.len() < 2 {
        return Err(Error::InvalidArgument("need at least two bin edges".into()));
    }
    if bin_edges.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("bin edges must be strictly ascending".into()));
    }
    let nb = bin_edges.len() - 1;
    let mut h = WidthHistogram {
        bin_edges: bin_edges.to_vec(),
        counts: vec![0; nb],
        total: 0,
        underflow: 0,
        overflow: 0,
    };
    let (lo, hi) = (bin_edges[0], bin_edges[nb]);
    for &w in widths {
        if w < lo {
            h.underflow += 1;
        } else if w > hi || w.is_nan() {
            h.overflow += 1;
        } else {
            let idx = bin_edges.partition_point(|&e| e <= w).saturating_sub(1).min(nb - 1);
            h.counts[idx] += 1;
            h.total += 1;
        }
    }
    Ok(h)
}
