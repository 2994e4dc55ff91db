//! Random-dimer model of a strongly disordered chain.
//!
//! Two sites with energy difference ε₀₁ ~ N(0, 2σ²) and coupling J, started on
//! site 0. The disorder-averaged diffusivity is the Gaussian average of Ṗ₁.

use std::f64::consts::{FRAC_PI_4, PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{erf, even_gaussian_average, QuadratureSettings};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimerParams {
    pub coupling: f64,
    pub sigma: f64,
}

impl DimerParams {
    pub fn new(coupling: f64, sigma: f64) -> Result<Self> {
        if !coupling.is_finite() || coupling == 0.0 {
            return Err(Error::InvalidArgument(format!("coupling must be nonzero, got {coupling}")));
        }
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidArgument(format!("sigma must be > 0, got {sigma}")));
        }
        Ok(Self { coupling, sigma })
    }

    /// Standard deviation of ε₀₁.
    pub fn eps_std(&self) -> f64 {
        SQRT_2 * self.sigma
    }
}

/// Population of site 1 at time t.
pub fn dimer_population(j: f64, eps01: f64, t: f64) -> f64 {
    let om2 = 4.0 * j * j + eps01 * eps01;
    2.0 * j * j / om2 * (1.0 - (om2.sqrt() * t).cos())
}

/// Ṗ₁ = (2J²/Ω) sin Ωt with Ω = √(4J² + ε₀₁²).
pub fn dimer_population_rate(j: f64, eps01: f64, t: f64) -> f64 {
    let om = (4.0 * j * j + eps01 * eps01).sqrt();
    2.0 * j * j / om * (om * t).sin()
}

/// Disorder-averaged D(t) = E[Ṗ₁(t)] at one time.
pub fn dimer_diffusivity_exact(params: &DimerParams, t: f64) -> Result<f64> {
    Ok(dimer_diffusivity_exact_grid(params, &[t], &QuadratureSettings::default())?[0])
}

/// E[Ṗ₁] on a whole time grid with one shared quadrature rule.
pub fn dimer_diffusivity_exact_grid(params: &DimerParams, times: &[f64], settings: &QuadratureSettings) -> Result<Vec<f64>> {
    if times.is_empty() {
        return Ok(Vec::new());
    }
    let j = params.coupling;
    let t_max = times.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let res = even_gaussian_average(
        |eps, out| {
            let om = (4.0 * j * j + eps * eps).sqrt();
            let pre = 2.0 * j * j / om;
            for (o, &t) in out.iter_mut().zip(times) {
                *o = pre * (om * t).sin();
            }
        },
        params.eps_std(),
        t_max,
        times.len(),
        settings,
    )
    .map_err(|e| match e {
        Error::QuadratureNoConvergence { achieved, wanted, .. } => Error::QuadratureNoConvergence { t: t_max, achieved, wanted },
        other => other,
    })?;
    Ok(res.values)
}

/// Power of |J| in the asymptotic prefactor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum AsymptoticPrefactor {
    /// |J|^{3/2}, matches the quadrature at J ≠ 1.
    #[default]
    ThreeHalves,
    /// |J|^{2/3}.
    TwoThirds,
}

impl AsymptoticPrefactor {
    pub fn value(&self, j: f64) -> f64 {
        match self {
            AsymptoticPrefactor::ThreeHalves => j.abs().powf(1.5),
            AsymptoticPrefactor::TwoThirds => j.abs().powf(2.0 / 3.0),
        }
    }
}

/// D_A(t) = (C_J/σ) sin(2|J|t + π/4)/√t, valid for σ ≫ |J|.
pub fn dimer_diffusivity_asymptotic(params: &DimerParams, t: f64, prefactor: AsymptoticPrefactor) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("asymptotic diffusivity needs t > 0, got {t}")));
    }
    let j = params.coupling.abs();
    Ok(prefactor.value(j) / params.sigma * (2.0 * j * t + FRAC_PI_4).sin() / t.sqrt())
}

/// √π J²/σ (1 − J²t²) erf(σt), the short-time form around the first peak.
pub fn turnover_diffusivity(params: &DimerParams, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("turnover diffusivity needs t >= 0, got {t}")));
    }
    let (j, s) = (params.coupling, params.sigma);
    Ok(PI.sqrt() * j * j / s * (1.0 - j * j * t * t) * erf(s * t))
}

/// t_p = sqrt(L − ln L)/(σ√2) with L = ln(2σ⁴/(πJ⁴)).
pub fn turnover_time(params: &DimerParams) -> Result<f64> {
    let (j, s) = (params.coupling, params.sigma);
    let l = (2.0 * s.powi(4) / (PI * j.powi(4))).ln();
    if !(l > 1.0) {
        return Err(Error::Domain(format!(
            "turnover time undefined for sigma/|J| = {}: log argument {l} <= 1",
            s / j.abs()
        )));
    }
    Ok((l - l.ln()).sqrt() / (s * SQRT_2))
}
