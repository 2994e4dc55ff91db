//! Random dimer under pure dephasing.
//!
//! With z = P₀ − P₁, u = 2 Re ρ₀₁, v = 2 Im ρ₀₁ the two-site equations close
//! on x = (z, u, v):
//!
//! ż = −4J v,  u̇ = −Γu + εv,  v̇ = Jz − εu − Γv,  x(0) = (1, 0, 0)
//!
//! and Ṗ₁ = 2J v. The Laplace transform of v is J(s + Γ)/p(s) with
//! p(s) = s[(s + Γ)² + ε²] + 4J²(s + Γ), so v(t) is a sum over the roots of p.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{even_gaussian_average, QuadratureSettings};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HsrDimerAsymptotic {
    pub total: f64,
    /// Non-oscillating baseline D₁.
    pub baseline: f64,
    /// 2 Re D₂.
    pub oscillatory: f64,
}

/// Large-σ form of the disorder-averaged dimer diffusivity with dephasing.
pub fn hsr_dimer_asymptotic(j: f64, sigma: f64, gamma: f64, t: f64) -> Result<HsrDimerAsymptotic> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("asymptotic HSR diffusivity needs t > 0, got {t}")));
    }
    if !(sigma > 0.0) || !(gamma >= 0.0) || j == 0.0 {
        return Err(Error::InvalidArgument(format!(
            "need sigma > 0, gamma >= 0, J != 0; got sigma={sigma}, gamma={gamma}, J={j}"
        )));
    }
    let ja = j.abs();
    let baseline = ja / (2.0 * sigma) * (gamma / t).sqrt() - j * j * gamma / (sigma * sigma);
    let oscillatory = oscillation_amplitude(j, sigma, gamma, t) * (2.0 * t * ja + oscillation_phase(j, gamma)).sin();
    Ok(HsrDimerAsymptotic {
        total: baseline + oscillatory,
        baseline,
        oscillatory,
    })
}

/// Envelope √2 J² e^{−Γt/2} / (σ √t (Γ² + 4J²)^{1/4}).
pub fn oscillation_amplitude(j: f64, sigma: f64, gamma: f64, t: f64) -> f64 {
    std::f64::consts::SQRT_2 * j * j * (-0.5 * gamma * t).exp() / (sigma * t.sqrt() * (gamma * gamma + 4.0 * j * j).powf(0.25))
}

/// Phase −½ arg(Γ − 2i|J|), equal to π/4 at Γ = 0.
pub fn oscillation_phase(j: f64, gamma: f64) -> f64 {
    -0.5 * Complex64::new(gamma, -2.0 * j.abs()).arg()
}

/// Ṗ₁(t) of one dimer with detuning ε, from the residues of V(s).
pub fn dimer_bloch_rate(j: f64, eps: f64, gamma: f64, t: f64) -> f64 {
    let roots = BlochRoots::new(j, eps, gamma);
    let mut out = [0.0];
    roots.rate_into(&[t], &mut out);
    out[0]
}

struct BlochRoots {
    j: f64,
    real: f64,
    pair: Complex64,
    /// Residues J(r + Γ)/p'(r).
    res_real: f64,
    res_pair: Complex64,
    fallback: Option<nalgebra::Matrix3<f64>>,
}

impl BlochRoots {
    fn new(j: f64, eps: f64, gamma: f64) -> Self {
        let c1 = gamma * gamma + eps * eps + 4.0 * j * j;
        let p = |s: f64| ((s + 2.0 * gamma) * s + c1) * s + 4.0 * j * j * gamma;
        let dp = |s: f64| (3.0 * s + 4.0 * gamma) * s + c1;
        // p(−Γ) = −Γε² ≤ 0 ≤ p(0), so a real root lies in [−Γ, 0].
        let (mut lo, mut hi) = (-gamma, 0.0);
        let mut r = -gamma * (4.0 * j * j) / c1;
        for _ in 0..200 {
            let v = p(r);
            if v == 0.0 {
                break;
            }
            if v < 0.0 {
                lo = r;
            } else {
                hi = r;
            }
            let step = v / dp(r);
            let mut next = r - step;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - r).abs() <= 1e-16 * (1.0 + r.abs()) {
                r = next;
                break;
            }
            r = next;
        }
        let b = 2.0 * gamma + r;
        let c = c1 + r * b;
        let disc = b * b - 4.0 * c;
        // Near-degenerate roots make the residues ill-conditioned.
        let fallback = if disc > -1e-6 * (c.abs() + 1.0) {
            Some(nalgebra::Matrix3::new(0.0, 0.0, -4.0 * j, 0.0, -gamma, eps, j, -eps, -gamma))
        } else {
            None
        };
        let pair = Complex64::new(-0.5 * b, 0.5 * (-disc).max(0.0).sqrt());
        let dpc = |s: Complex64| (s * 3.0 + 4.0 * gamma) * s + c1;
        let res_real = j * (r + gamma) / dp(r);
        let res_pair = (pair + gamma) * j / dpc(pair);
        Self {
            j,
            real: r,
            pair,
            res_real,
            res_pair,
            fallback,
        }
    }

    fn rate_into(&self, times: &[f64], out: &mut [f64]) {
        if let Some(m) = &self.fallback {
            for (o, &t) in out.iter_mut().zip(times) {
                let x = (m * t).exp() * nalgebra::Vector3::new(1.0, 0.0, 0.0);
                *o = 2.0 * self.j * x[2];
            }
            return;
        }
        for (o, &t) in out.iter_mut().zip(times) {
            let v = self.res_real * (self.real * t).exp() + 2.0 * (self.res_pair * (self.pair * t).exp()).re;
            *o = 2.0 * self.j * v;
        }
    }
}

/// E[Ṗ₁(t)] over ε ~ N(0, 2σ²) on a time grid.
pub fn hsr_dimer_exact_grid(j: f64, sigma: f64, gamma: f64, times: &[f64], settings: &QuadratureSettings) -> Result<Vec<f64>> {
    if !(sigma > 0.0) || !(gamma >= 0.0) || j == 0.0 {
        return Err(Error::InvalidArgument(format!(
            "need sigma > 0, gamma >= 0, J != 0; got sigma={sigma}, gamma={gamma}, J={j}"
        )));
    }
    if times.is_empty() {
        return Ok(Vec::new());
    }
    let t_max = times.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let res = even_gaussian_average(
        |eps, out| BlochRoots::new(j, eps, gamma).rate_into(times, out),
        std::f64::consts::SQRT_2 * sigma,
        t_max,
        times.len(),
        settings,
    )?;
    Ok(res.values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Tridiagonal;
    use crate::open::hsr::{site_projector, superoperator_propagate, HsrParams};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn residues_match_matrix_exponential() {
        for &(j, eps, gamma) in &[(1.0, 0.0, 0.0), (1.0, 3.0, 0.1), (0.7, -20.0, 0.5), (1.0, 0.3, 1.5), (1.0, 5.0, 0.0)] {
            let m = nalgebra::Matrix3::new(0.0, 0.0, -4.0 * j, 0.0, -gamma, eps, j, -eps, -gamma);
            for &t in &[0.0, 0.3, 2.0, 7.5] {
                let x = (m * t).exp() * nalgebra::Vector3::new(1.0, 0.0, 0.0);
                assert_abs_diff_eq!(dimer_bloch_rate(j, eps, gamma, t), 2.0 * j * x[2], epsilon = 1e-11);
            }
        }
    }

    #[test]
    fn bloch_rate_matches_lindblad_dimer() {
        let (j, eps, gamma) = (1.0, 2.5, 0.4);
        let h = Tridiagonal::new(vec![0.0, eps], vec![j]).unwrap();
        let params = HsrParams::new(gamma).unwrap();
        let times = [0.5, 1.0, 3.0];
        let tr = superoperator_propagate(&h, &params, &site_projector(2, 0), &times).unwrap();
        for (ti, &t) in times.iter().enumerate() {
            let rho01 = tr.matrices[ti][1];
            // dP₁/dt = 2 Im (Hρ)₁₁ = 2J Im ρ₀₁
            assert_abs_diff_eq!(dimer_bloch_rate(j, eps, gamma, t), 2.0 * j * rho01.im, epsilon = 1e-11);
        }
    }

    #[test]
    fn closed_limit_matches_closed_dimer() {
        let p = crate::dimer::DimerParams::new(1.0, 20.0).unwrap();
        let times: Vec<f64> = (1..40).map(|i| i as f64 * 0.25).collect();
        let closed = crate::dimer::dimer_diffusivity_exact_grid(&p, &times, &Default::default()).unwrap();
        let open = hsr_dimer_exact_grid(1.0, 20.0, 0.0, &times, &Default::default()).unwrap();
        for (a, b) in closed.iter().zip(&open) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn asymptotic_limits() {
        let a = hsr_dimer_asymptotic(1.0, 20.0, 0.0, 3.0).unwrap();
        assert_eq!(a.baseline, 0.0);
        assert_abs_diff_eq!(oscillation_phase(1.0, 0.0), PI / 4.0, epsilon = 1e-15);
        let d = crate::dimer::dimer_diffusivity_asymptotic(&crate::dimer::DimerParams::new(1.0, 20.0).unwrap(), 3.0, Default::default()).unwrap();
        assert_abs_diff_eq!(a.total, d, epsilon = 1e-15);
        let g = 0.3;
        let t = 4.0;
        let ratio = oscillation_amplitude(1.0, 20.0, g, t + PI) / oscillation_amplitude(1.0, 20.0, g, t);
        assert_abs_diff_eq!(ratio * (t / (t + PI)).sqrt().recip(), (-g * PI / 2.0).exp(), epsilon = 1e-14);
        assert!(hsr_dimer_asymptotic(1.0, 20.0, 0.1, 0.0).is_err());
    }
}
