//! Closed-system dynamics by spectral decomposition.
//!
//! With H = Uᵀ Λ U the state at time t is ψ_n(t) = Σ_k U_kn e^{−iλ_k t} ⟨v_k|ψ₀⟩,
//! so every observable here is exact up to eigensolver accuracy.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::eigen::Eigensystem;
use crate::error::{Error, Result};
use crate::lattice::{LatticeSpec, Tridiagonal};

/// Edge population above which a finite chain no longer mimics an infinite one.
pub const EDGE_THRESHOLD: f64 = 1e-6;

/// Uniform time grid `0, dt, 2dt, ..., t_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t_max: f64,
    pub dt: f64,
}

impl Default for TimeGrid {
    fn default() -> Self {
        Self { t_max: 20.0, dt: 0.01 }
    }
}

impl TimeGrid {
    pub fn new(t_max: f64, dt: f64) -> Result<Self> {
        let g = Self { t_max, dt };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() || !(self.t_max >= 0.0) || !self.t_max.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "time grid needs dt > 0 and t_max >= 0, got dt = {}, t_max = {}",
                self.dt, self.t_max
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        (self.t_max / self.dt + 1e-9).floor() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|i| i as f64 * self.dt).collect()
    }
}

pub(crate) fn check_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::InvalidArgument("empty time grid".into()));
    }
    if !(times[0] >= 0.0) {
        return Err(Error::InvalidArgument(format!("first time must be >= 0, got {}", times[0])));
    }
    if times.windows(2).any(|w| !(w[1] >= w[0])) || times.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidArgument("times must be finite and ascending".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialKind {
    Site { n0: usize },
    Gaussian { n0: usize, w: f64 },
}

impl InitialKind {
    pub fn center(&self) -> usize {
        match *self {
            InitialKind::Site { n0 } | InitialKind::Gaussian { n0, .. } => n0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialState {
    pub kind: InitialKind,
    pub amplitudes: Vec<Complex64>,
}

impl InitialState {
    /// Site index used as the origin of position moments.
    pub fn origin(&self) -> usize {
        self.kind.center()
    }

    pub fn populations(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// ⟨n²⟩ − ⟨n⟩² of |ψ|².
    pub fn variance(&self) -> f64 {
        let (m1, m2) = site_moments(&self.populations(), self.origin());
        m2 - m1 * m1
    }
}

pub fn make_initial_state(spec: &LatticeSpec, kind: InitialKind) -> Result<InitialState> {
    let n = spec.n_sites();
    let n0 = kind.center();
    if n0 >= n {
        return Err(Error::InvalidArgument(format!("initial site {n0} outside chain of {n} sites")));
    }
    let amplitudes = match kind {
        InitialKind::Site { n0 } => {
            let mut a = vec![Complex64::new(0.0, 0.0); n];
            a[n0] = Complex64::new(1.0, 0.0);
            a
        }
        InitialKind::Gaussian { n0, w } => {
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::InvalidArgument(format!("gaussian width must be > 0, got {w}")));
            }
            let raw: Vec<f64> = (0..n)
                .map(|i| {
                    let x = i as f64 - n0 as f64;
                    (-x * x / (4.0 * w * w)).exp()
                })
                .collect();
            let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
            raw.into_iter().map(|x| Complex64::new(x / norm, 0.0)).collect()
        }
    };
    Ok(InitialState { kind, amplitudes })
}

fn site_moments(p: &[f64], origin: usize) -> (f64, f64) {
    let (mut m1, mut m2) = (0.0, 0.0);
    for (i, &pi) in p.iter().enumerate() {
        let x = i as f64 - origin as f64;
        m1 += x * pi;
        m2 += x * x * pi;
    }
    (m1, m2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationTrace {
    pub times: Vec<f64>,
    /// Row-major T×N.
    pub populations: Vec<f64>,
    pub n_sites: usize,
}

impl PopulationTrace {
    pub fn at(&self, ti: usize) -> &[f64] {
        &self.populations[ti * self.n_sites..(ti + 1) * self.n_sites]
    }
}

/// Precomputed spectral data of one initial state.
struct Spectral<'a> {
    es: &'a Eigensystem,
    coeffs: Vec<Complex64>,
}

impl<'a> Spectral<'a> {
    fn new(es: &'a Eigensystem, psi0: &InitialState) -> Result<Self> {
        if psi0.amplitudes.len() != es.dim() {
            return Err(Error::DimensionMismatch {
                expected: es.dim(),
                got: psi0.amplitudes.len(),
            });
        }
        Ok(Self {
            es,
            coeffs: es.project(&psi0.amplitudes),
        })
    }

    fn state_at(&self, t: f64, phased: &mut [Complex64], psi: &mut [Complex64]) {
        for ((a, &c), &lam) in phased.iter_mut().zip(&self.coeffs).zip(&self.es.eigenvalues) {
            let (s, co) = (lam * t).sin_cos();
            *a = c * Complex64::new(co, -s);
        }
        psi.iter_mut().for_each(|x| *x = Complex64::new(0.0, 0.0));
        for (k, &a) in phased.iter().enumerate() {
            for (x, &u) in psi.iter_mut().zip(self.es.row(k)) {
                *x += a * u;
            }
        }
    }
}

pub fn propagate_populations(es: &Eigensystem, psi0: &InitialState, times: &[f64]) -> Result<PopulationTrace> {
    check_times(times)?;
    let sp = Spectral::new(es, psi0)?;
    let n = es.dim();
    let mut phased = vec![Complex64::new(0.0, 0.0); n];
    let mut psi = vec![Complex64::new(0.0, 0.0); n];
    let mut populations = Vec::with_capacity(n * times.len());
    for &t in times {
        sp.state_at(t, &mut phased, &mut psi);
        populations.extend(psi.iter().map(|a| a.norm_sqr()));
    }
    Ok(PopulationTrace {
        times: times.to_vec(),
        populations,
        n_sites: n,
    })
}

/// Tridiagonal H = Uᵀ Λ U rebuilt from an eigensystem.
pub fn reconstruct_hamiltonian(es: &Eigensystem) -> Tridiagonal {
    let n = es.dim();
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n - 1];
    for k in 0..n {
        let lam = es.eigenvalues[k];
        let row = es.row(k);
        for i in 0..n {
            diag[i] += lam * row[i] * row[i];
        }
        for i in 0..n - 1 {
            off[i] += lam * row[i] * row[i + 1];
        }
    }
    Tridiagonal { diag, off }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MomentOptions {
    pub second_derivatives: bool,
    /// Fail with [`Error::BoundaryReached`] if the end sites exceed this population.
    pub edge_threshold: Option<f64>,
}

/// Position moments relative to the initial site and their analytic time derivatives.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MomentTrace {
    pub times: Vec<f64>,
    pub m1: Vec<f64>,
    pub m2: Vec<f64>,
    pub dm1: Vec<f64>,
    pub dm2: Vec<f64>,
    /// Empty unless second derivatives were requested.
    pub ddm1: Vec<f64>,
    pub ddm2: Vec<f64>,
    pub max_edge_population: f64,
}

impl MomentTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn msd(&self) -> Vec<f64> {
        self.m1.iter().zip(&self.m2).map(|(a, b)| b - a * a).collect()
    }

    /// D = ½ d/dt (⟨n²⟩ − ⟨n⟩²).
    pub fn diffusivity(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| 0.5 * (self.dm2[i] - 2.0 * self.m1[i] * self.dm1[i]))
            .collect()
    }

    /// Ḋ, available when second derivatives were computed.
    pub fn diffusivity_rate(&self) -> Option<Vec<f64>> {
        if self.ddm1.len() != self.len() {
            return None;
        }
        Some(
            (0..self.len())
                .map(|i| 0.5 * (self.ddm2[i] - 2.0 * self.dm1[i] * self.dm1[i] - 2.0 * self.m1[i] * self.ddm1[i]))
                .collect(),
        )
    }

    pub fn to_diffusivity_trace(&self) -> DiffusivityTrace {
        DiffusivityTrace {
            times: self.times.clone(),
            d_values: self.diffusivity(),
            msd: self.msd(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusivityTrace {
    pub times: Vec<f64>,
    pub d_values: Vec<f64>,
    pub msd: Vec<f64>,
}

/// ⟨n⟩, ⟨n²⟩ about the initial site with d/dt⟨A⟩ = 2 Im⟨ψ|A H|ψ⟩ and
/// d²/dt²⟨A⟩ = 2(⟨Hψ|A|Hψ⟩ − Re⟨ψ|A H²|ψ⟩).
pub fn moments(es: &Eigensystem, psi0: &InitialState, times: &[f64], opts: MomentOptions) -> Result<MomentTrace> {
    check_times(times)?;
    let sp = Spectral::new(es, psi0)?;
    let h = reconstruct_hamiltonian(es);
    let n = es.dim();
    let origin = psi0.origin() as f64;
    let x: Vec<f64> = (0..n).map(|i| i as f64 - origin).collect();

    let zero = Complex64::new(0.0, 0.0);
    let mut phased = vec![zero; n];
    let mut psi = vec![zero; n];
    let mut hpsi = vec![zero; n];
    let mut h2psi = vec![zero; n];

    let nt = times.len();
    let mut out = MomentTrace {
        times: times.to_vec(),
        m1: Vec::with_capacity(nt),
        m2: Vec::with_capacity(nt),
        dm1: Vec::with_capacity(nt),
        dm2: Vec::with_capacity(nt),
        ..Default::default()
    };
    for &t in times {
        sp.state_at(t, &mut phased, &mut psi);
        h.apply_complex(&psi, &mut hpsi);
        let (mut m1, mut m2, mut j1, mut j2) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..n {
            let p = psi[i].norm_sqr();
            let xi = x[i];
            m1 += xi * p;
            m2 += xi * xi * p;
            let im = (psi[i].conj() * hpsi[i]).im;
            j1 += xi * im;
            j2 += xi * xi * im;
        }
        out.m1.push(m1);
        out.m2.push(m2);
        out.dm1.push(2.0 * j1);
        out.dm2.push(2.0 * j2);
        let edge = psi[0].norm_sqr().max(psi[n - 1].norm_sqr());
        out.max_edge_population = out.max_edge_population.max(edge);

        if opts.second_derivatives {
            h.apply_complex(&hpsi, &mut h2psi);
            let (mut a1, mut a2) = (0.0, 0.0);
            for i in 0..n {
                let q = hpsi[i].norm_sqr() - (psi[i].conj() * h2psi[i]).re;
                a1 += x[i] * q;
                a2 += x[i] * x[i] * q;
            }
            out.ddm1.push(2.0 * a1);
            out.ddm2.push(2.0 * a2);
        }
    }
    if let Some(threshold) = opts.edge_threshold {
        if out.max_edge_population > threshold {
            return Err(Error::BoundaryReached {
                population: out.max_edge_population,
                threshold,
            });
        }
    }
    Ok(out)
}

/// Diffusivity and variance of a single realization.
pub fn diffusivity(es: &Eigensystem, psi0: &InitialState, times: &[f64]) -> Result<DiffusivityTrace> {
    Ok(moments(es, psi0, times, MomentOptions::default())?.to_diffusivity_trace())
}

/// Infinite-time average of P(n, t) from site n0, indexed by m = n − n0 over
/// −(N−1)..=N−1; entry `m + N − 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelativeDistribution {
    pub values: Vec<f64>,
    /// Index of m = 0.
    pub origin: usize,
}

impl RelativeDistribution {
    pub fn zeros(n_sites: usize) -> Self {
        Self {
            values: vec![0.0; 2 * n_sites - 1],
            origin: n_sites - 1,
        }
    }

    pub fn offsets(&self) -> impl Iterator<Item = i64> + '_ {
        let o = self.origin as i64;
        (0..self.values.len() as i64).map(move |i| i - o)
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn l1_distance(&self, other: &RelativeDistribution) -> Result<f64> {
        if self.values.len() != other.values.len() || self.origin != other.origin {
            return Err(Error::DimensionMismatch {
                expected: self.values.len(),
                got: other.values.len(),
            });
        }
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).sum())
    }
}

pub fn time_averaged_distribution(es: &Eigensystem, n0: usize) -> Result<RelativeDistribution> {
    let n = es.dim();
    if n0 >= n {
        return Err(Error::InvalidArgument(format!("initial site {n0} outside chain of {n} sites")));
    }
    let mut d = RelativeDistribution::zeros(n);
    let shift = d.origin - n0;
    for k in 0..n {
        let row = es.row(k);
        let w0 = row[n0] * row[n0];
        for (site, u) in row.iter().enumerate() {
            d.values[site + shift] += w0 * u * u;
        }
    }
    Ok(d)
}

/// Initial sites at least N/10 away from either end.
pub fn bulk_sites(n_sites: usize) -> std::ops::Range<usize> {
    let margin = n_sites / 10;
    margin..n_sites - margin
}

/// Infinite-time distribution averaged over initial sites of one realization.
pub fn site_averaged_distribution(es: &Eigensystem, sites: std::ops::Range<usize>) -> Result<RelativeDistribution> {
    if sites.is_empty() {
        return Err(Error::InvalidArgument("no initial sites to average over".into()));
    }
    let count = sites.len() as f64;
    let mut acc = RelativeDistribution::zeros(es.dim());
    for n0 in sites {
        let d = time_averaged_distribution(es, n0)?;
        for (a, v) in acc.values.iter_mut().zip(&d.values) {
            *a += v / count;
        }
    }
    Ok(acc)
}

/// W = sqrt(Σ_m m² P̄(m)).
pub fn stationary_width(dist: &RelativeDistribution) -> Result<f64> {
    let total = dist.total();
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidArgument(format!("distribution not normalized: sum = {total}")));
    }
    let s: f64 = dist
        .offsets()
        .zip(&dist.values)
        .map(|(m, p)| (m * m) as f64 * p)
        .sum();
    Ok(s.sqrt())
}
