//! Curve analysis used to compare numerics against closed forms.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::golden_min;

/// y ≈ A t^{−p} e^{−κt} sin(ωt + φ) + c
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscillationFit {
    pub omega: f64,
    /// In (−π, π].
    pub phase: f64,
    pub prefactor: f64,
    pub exponent: f64,
    pub baseline: f64,
    pub damping: f64,
    pub rms_residual: f64,
}

impl OscillationFit {
    pub fn amplitude_at(&self, t: f64) -> f64 {
        self.prefactor * t.powf(-self.exponent) * (-self.damping * t).exp()
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.amplitude_at(t) * (self.omega * t + self.phase).sin() + self.baseline
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub with_baseline: bool,
    /// Search range for ω; estimated from zero crossings when `None`.
    pub omega_range: Option<(f64, f64)>,
    pub exponent_range: (f64, f64),
    /// Fix the envelope exponent instead of fitting it.
    pub fixed_exponent: Option<f64>,
    /// Known exponential damping rate κ, envelope t^{−p} e^{−κt}.
    pub damping: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            with_baseline: false,
            omega_range: None,
            exponent_range: (-1.0, 2.0),
            fixed_exponent: None,
            damping: 0.0,
        }
    }
}

fn window(times: &[f64], values: &[f64], t_range: (f64, f64)) -> Result<(Vec<f64>, Vec<f64>)> {
    if times.len() != values.len() {
        return Err(Error::DimensionMismatch {
            expected: times.len(),
            got: values.len(),
        });
    }
    let (t, y): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(values)
        .filter(|(t, _)| **t >= t_range.0 && **t <= t_range.1)
        .map(|(t, y)| (*t, *y))
        .unzip();
    if t.len() < 8 {
        return Err(Error::InvalidArgument(format!(
            "only {} samples in fit window [{}, {}]",
            t.len(),
            t_range.0,
            t_range.1
        )));
    }
    if t[0] <= 0.0 {
        return Err(Error::Domain("fit window must exclude t <= 0".into()));
    }
    Ok((t, y))
}

/// Linear least squares for fixed (ω, p); returns coefficients and residual sum of squares.
fn linear_fit(t: &[f64], y: &[f64], omega: f64, p: f64, damping: f64, baseline: bool) -> (Vec<f64>, f64) {
    let cols = if baseline { 3 } else { 2 };
    let a = DMatrix::from_fn(t.len(), cols, |i, j| {
        let env = t[i].powf(-p) * (-damping * t[i]).exp();
        match j {
            0 => env * (omega * t[i]).sin(),
            1 => env * (omega * t[i]).cos(),
            _ => 1.0,
        }
    });
    let b = DVector::from_column_slice(y);
    let x = a.clone().svd(true, true).solve(&b, 1e-14).unwrap_or_else(|_| DVector::zeros(cols));
    let r = &a * &x - b;
    (x.as_slice().to_vec(), r.norm_squared())
}

/// Variable-projection fit of a damped sinusoid over `t_range`.
pub fn fit_oscillation(times: &[f64], values: &[f64], t_range: (f64, f64), opts: &FitOptions) -> Result<OscillationFit> {
    let (t, y) = window(times, values, t_range)?;
    let (w_lo, w_hi) = match opts.omega_range {
        Some(r) => r,
        None => {
            let mean = y.iter().sum::<f64>() / y.len() as f64;
            let centered: Vec<f64> = y.iter().map(|v| v - mean).collect();
            let z = zero_crossings(&t, &centered);
            if z.len() < 3 {
                return Err(Error::InvalidArgument("too few zero crossings to estimate the frequency".into()));
            }
            let half = (z[z.len() - 1] - z[0]) / (z.len() - 1) as f64;
            let w0 = std::f64::consts::PI / half;
            (0.85 * w0, 1.15 * w0)
        }
    };
    let best_p = |omega: f64| -> (f64, f64) {
        match opts.fixed_exponent {
            Some(p) => (p, linear_fit(&t, &y, omega, p, opts.damping, opts.with_baseline).1),
            None => {
                let p = golden_min(|p| linear_fit(&t, &y, omega, p, opts.damping, opts.with_baseline).1, opts.exponent_range.0, opts.exponent_range.1, 1e-7);
                (p, linear_fit(&t, &y, omega, p, opts.damping, opts.with_baseline).1)
            }
        }
    };
    // coarse scan guards against side minima of the residual in ω
    let n_scan = 40;
    let (mut best_w, mut best_r) = (w_lo, f64::INFINITY);
    for i in 0..=n_scan {
        let w = w_lo + (w_hi - w_lo) * i as f64 / n_scan as f64;
        let r = best_p(w).1;
        if r < best_r {
            best_r = r;
            best_w = w;
        }
    }
    let step = (w_hi - w_lo) / n_scan as f64;
    let omega = golden_min(|w| best_p(w).1, (best_w - step).max(w_lo), (best_w + step).min(w_hi), 1e-10);
    let (p, rss) = best_p(omega);
    let (c, _) = linear_fit(&t, &y, omega, p, opts.damping, opts.with_baseline);
    let (a, b) = (c[0], c[1]);
    Ok(OscillationFit {
        omega,
        phase: b.atan2(a),
        prefactor: a.hypot(b),
        exponent: p,
        baseline: if opts.with_baseline { c[2] } else { 0.0 },
        damping: opts.damping,
        rms_residual: (rss / t.len() as f64).sqrt(),
    })
}

/// Least-squares slope of ln y against ln x.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidArgument(format!("need matching inputs with >= 2 points, got {} and {}", x.len(), y.len())));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return Err(Error::Domain("log-log slope needs positive data".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Linearly interpolated sign changes.
pub fn zero_crossings(times: &[f64], values: &[f64]) -> Vec<f64> {
    let mut out = Vec::new();
    for i in 1..times.len().min(values.len()) {
        let (a, b) = (values[i - 1], values[i]);
        if a == 0.0 {
            if i == 1 || values[i - 2] != 0.0 {
                out.push(times[i - 1]);
            }
        } else if a * b < 0.0 {
            out.push(times[i - 1] + (times[i] - times[i - 1]) * a / (a - b));
        }
    }
    out
}

/// Vertex of the parabola through three equally spaced samples around `i`.
fn parabolic(times: &[f64], values: &[f64], i: usize) -> (f64, f64) {
    let (y0, y1, y2) = (values[i - 1], values[i], values[i + 1]);
    let denom = y0 - 2.0 * y1 + y2;
    if denom == 0.0 {
        return (times[i], y1);
    }
    let h = 0.5 * (times[i + 1] - times[i - 1]);
    let off = 0.5 * (y0 - y2) / denom;
    (times[i] + off * h, y1 - 0.25 * (y0 - y2) * off)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extremum {
    Max,
    Min,
}

/// First interior local extremum with t ≥ `after`, refined by a parabola.
pub fn first_extremum(times: &[f64], values: &[f64], kind: Extremum, after: f64) -> Option<(f64, f64)> {
    let sign = if kind == Extremum::Max { 1.0 } else { -1.0 };
    (1..values.len().saturating_sub(1))
        .find(|&i| times[i] >= after && sign * (values[i] - values[i - 1]) > 0.0 && sign * (values[i] - values[i + 1]) >= 0.0)
        .map(|i| parabolic(times, values, i))
}

/// Global minimum over [t_lo, t_hi], refined by a parabola.
pub fn argmin_in(times: &[f64], values: &[f64], t_lo: f64, t_hi: f64) -> Option<(f64, f64)> {
    let i = (0..values.len())
        .filter(|&i| times[i] >= t_lo && times[i] <= t_hi)
        .min_by(|&a, &b| values[a].total_cmp(&values[b]))?;
    if i == 0 || i + 1 >= values.len() {
        return Some((times[i], values[i]));
    }
    Some(parabolic(times, values, i))
}

/// Linear interpolation of a sampled curve.
pub fn interpolate(times: &[f64], values: &[f64], t: f64) -> Result<f64> {
    if times.is_empty() || t < times[0] || t > times[times.len() - 1] {
        return Err(Error::Domain(format!("interpolation point {t} outside sampled range")));
    }
    let i = times.partition_point(|&x| x <= t).min(times.len() - 1).max(1);
    let (t0, t1) = (times[i - 1], times[i]);
    let w = if t1 > t0 { (t - t0) / (t1 - t0) } else { 0.0 };
    Ok(values[i - 1] * (1.0 - w) + values[i] * w)
}
