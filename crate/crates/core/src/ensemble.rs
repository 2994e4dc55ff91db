//! Disorder-averaged experiments.
//!
//! Realization `i` always uses `sample_disorder(spec, master_seed, i)`. Partial
//! results are combined by a binary tree over the index range whose shape
//! depends only on M, so the output is bit-identical for any thread count.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::closed::{make_initial_state, moments, time_averaged_distribution, InitialKind, InitialState, MomentOptions, MomentTrace, TimeGrid};
use crate::eigen::{diagonalize_indexed, Eigensystem};
use crate::error::{Error, Result};
use crate::lattice::{build_hamiltonian, derive_seed, sample_disorder, LatticeSpec, Tridiagonal};
use crate::ode::OdeOptions;
use crate::open::hsr::{open_moments, pure_state, HsrParams};
use crate::open::kappa::to_eigenbasis;
use crate::open::secular::secular_moments;
use crate::stats::CoMoments;
use crate::widths::{eigenstate_widths, width_histogram, WidthHistogram};

/// Realizations accumulated sequentially before tree merging.
const LEAF: u64 = 16;
/// Smallest eigenvalue gap accepted for infinite-time averages.
pub const DEGENERACY_TOL: f64 = 1e-10;
/// Aborts when more than this fraction of primary realizations fail.
pub const MAX_FAILURE_RATE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Experiment {
    StationaryDistribution,
    ClosedDiffusivity,
    OpenDiffusivity {
        hsr: HsrParams,
        /// Switch to the secular rate equation after this time.
        secular_after: Option<f64>,
    },
    EigenWidths { bin_edges: Vec<f64> },
    SecularDiffusivity { hsr: HsrParams },
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::StationaryDistribution => "stationary_distribution",
            Experiment::ClosedDiffusivity => "closed_diffusivity",
            Experiment::OpenDiffusivity { .. } => "open_diffusivity",
            Experiment::EigenWidths { .. } => "eigen_widths",
            Experiment::SecularDiffusivity { .. } => "secular_diffusivity",
        }
    }

    fn time_resolved(&self) -> bool {
        matches!(
            self,
            Experiment::ClosedDiffusivity | Experiment::OpenDiffusivity { .. } | Experiment::SecularDiffusivity { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    pub spec: LatticeSpec,
    pub n_realizations: u64,
    pub master_seed: u64,
    pub experiment: Experiment,
    pub initial: InitialKind,
    pub grid: TimeGrid,
    /// Also accumulate second time derivatives (closed dynamics only).
    pub second_derivatives: bool,
    pub edge_threshold: Option<f64>,
    pub ode: OdeOptions,
    /// Worker count; the global rayon pool when `None`.
    pub threads: Option<usize>,
    /// Keep per-realization curves in index order.
    pub keep_raw: bool,
    /// Print a counter to standard error.
    pub progress: bool,
}

impl EnsembleConfig {
    /// Site start at the chain center, default grid, no monitor.
    pub fn new(spec: LatticeSpec, n_realizations: u64, master_seed: u64, experiment: Experiment) -> Self {
        Self {
            initial: InitialKind::Site { n0: spec.center() },
            spec,
            n_realizations,
            master_seed,
            experiment,
            grid: TimeGrid::default(),
            second_derivatives: false,
            edge_threshold: None,
            ode: OdeOptions::default(),
            threads: None,
            keep_raw: false,
            progress: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_realizations == 0 {
            return Err(Error::InvalidArgument("need at least one realization".into()));
        }
        if self.experiment.time_resolved() {
            self.grid.validate()?;
        }
        if self.initial.center() >= self.spec.n_sites() {
            return Err(Error::InvalidArgument(format!(
                "initial site {} outside chain of {} sites",
                self.initial.center(),
                self.spec.n_sites()
            )));
        }
        if self.second_derivatives && self.experiment != Experiment::ClosedDiffusivity {
            return Err(Error::InvalidArgument("second derivatives are only available for closed dynamics".into()));
        }
        if let Experiment::EigenWidths { bin_edges } = &self.experiment {
            width_histogram(&[], bin_edges)?;
        }
        if let Experiment::OpenDiffusivity { secular_after: Some(t), .. } = &self.experiment {
            if !(*t >= 0.0) {
                return Err(Error::InvalidArgument(format!("secular crossover must be >= 0, got {t}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scalar {
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub index: u64,
    pub message: String,
    /// Replacement index, `None` if the replacement also failed.
    pub replaced_by: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    pub index: u64,
    pub values: Vec<f64>,
}

/// Pointwise means with standard errors. `axis` holds times, offsets m or
/// bin centers depending on the experiment; `mean` is D(t), P̄(m) or the
/// width density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub experiment: String,
    pub axis: Vec<f64>,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub channels: BTreeMap<String, Channel>,
    pub scalars: BTreeMap<String, Scalar>,
    pub histogram: Option<WidthHistogram>,
    pub n_requested: u64,
    pub m_effective: u64,
    pub failures: Vec<FailureRecord>,
    pub raw: Option<Vec<RawRecord>>,
}

impl EnsembleStats {
    pub fn times(&self) -> &[f64] {
        &self.axis
    }

    pub fn channel(&self, name: &str) -> Result<&Channel> {
        self.channels
            .get(name)
            .ok_or_else(|| Error::InvalidArgument(format!("no channel {name:?} in {} result", self.experiment)))
    }

    pub fn scalar(&self, name: &str) -> Result<Scalar> {
        self.scalars
            .get(name)
            .copied()
            .ok_or_else(|| Error::InvalidArgument(format!("no scalar {name:?} in {} result", self.experiment)))
    }
}

/// Output of one realization.
struct Sample {
    curve: Vec<f64>,
    scalars: Vec<f64>,
    hist: Option<WidthHistogram>,
    raw: Vec<f64>,
}

struct Partial {
    curve: CoMoments,
    scalars: CoMoments,
    hist: Option<WidthHistogram>,
    raw: Vec<RawRecord>,
    failures: Vec<FailureRecord>,
}

impl Partial {
    fn merge(mut self, other: Partial) -> Result<Partial> {
        self.curve.merge(&other.curve)?;
        self.scalars.merge(&other.scalars)?;
        self.hist = match (self.hist, other.hist) {
            (Some(mut a), Some(b)) => {
                a.merge(&b)?;
                Some(a)
            }
            (a, b) => a.or(b),
        };
        self.raw.extend(other.raw);
        self.failures.extend(other.failures);
        Ok(self)
    }
}

struct Layout {
    points: usize,
    k: usize,
    n_scalars: usize,
}

struct Runner<'a> {
    cfg: &'a EnsembleConfig,
    times: Vec<f64>,
    layout: Layout,
    done: AtomicUsize,
}

impl<'a> Runner<'a> {
    fn new(cfg: &'a EnsembleConfig) -> Self {
        let n = cfg.spec.n_sites();
        let times = if cfg.experiment.time_resolved() { cfg.grid.times() } else { Vec::new() };
        let layout = match &cfg.experiment {
            Experiment::StationaryDistribution => Layout {
                points: 2 * n - 1,
                k: 1,
                n_scalars: 2,
            },
            Experiment::EigenWidths { bin_edges } => Layout {
                points: bin_edges.len() - 1,
                k: 1,
                n_scalars: 1,
            },
            _ => Layout {
                points: times.len(),
                k: if cfg.second_derivatives { 6 } else { 4 },
                n_scalars: 1,
            },
        };
        Self {
            cfg,
            times,
            layout,
            done: AtomicUsize::new(0),
        }
    }

    fn eigensystem(&self, index: u64) -> Result<(Tridiagonal, Eigensystem)> {
        let real = sample_disorder(&self.cfg.spec, self.cfg.master_seed, index);
        let h = build_hamiltonian(&self.cfg.spec, &real)?;
        let es = diagonalize_indexed(&h, Some(index))?;
        Ok((h, es))
    }

    fn sample(&self, index: u64) -> Result<Sample> {
        let cfg = self.cfg;
        let (h, es) = self.eigensystem(index)?;
        match &cfg.experiment {
            Experiment::StationaryDistribution => {
                let gap = es.min_gap();
                if gap < DEGENERACY_TOL {
                    return Err(Error::DegenerateSpectrum {
                        gap,
                        tolerance: DEGENERACY_TOL,
                    });
                }
                let d = time_averaged_distribution(&es, cfg.initial.center())?;
                let w2: f64 = d.offsets().zip(&d.values).map(|(m, p)| (m * m) as f64 * p).sum();
                Ok(Sample {
                    scalars: vec![w2, w2.max(0.0).sqrt()],
                    raw: d.values.clone(),
                    curve: d.values,
                    hist: None,
                })
            }
            Experiment::EigenWidths { bin_edges } => {
                let w = eigenstate_widths(&es)?;
                let hist = width_histogram(&w, bin_edges)?;
                let n = w.len() as f64;
                Ok(Sample {
                    curve: hist.counts.iter().map(|&c| c as f64 / n).collect(),
                    scalars: vec![w.iter().sum::<f64>() / n],
                    hist: Some(hist),
                    raw: w,
                })
            }
            Experiment::ClosedDiffusivity => {
                let psi0 = make_initial_state(&cfg.spec, cfg.initial)?;
                let opts = MomentOptions {
                    second_derivatives: cfg.second_derivatives,
                    edge_threshold: cfg.edge_threshold,
                };
                let mt = moments(&es, &psi0, &self.times, opts)?;
                Ok(self.time_sample(mt))
            }
            Experiment::OpenDiffusivity { hsr, secular_after } => {
                let psi0 = make_initial_state(&cfg.spec, cfg.initial)?;
                let mt = self.open_sample(&h, &es, hsr, *secular_after, &psi0)?;
                Ok(self.time_sample(mt))
            }
            Experiment::SecularDiffusivity { hsr } => {
                let psi0 = make_initial_state(&cfg.spec, cfg.initial)?;
                let c = es.project(&psi0.amplitudes);
                let p0: Vec<f64> = c.iter().map(|z| z.norm_sqr()).collect();
                let mt = secular_moments(&es, hsr, &p0, psi0.origin(), &self.times)?;
                Ok(self.time_sample(mt))
            }
        }
    }

    fn open_sample(&self, h: &Tridiagonal, es: &Eigensystem, hsr: &HsrParams, secular_after: Option<f64>, psi0: &InitialState) -> Result<MomentTrace> {
        let cfg = self.cfg;
        let origin = psi0.origin();
        let rho0 = pure_state(&psi0.amplitudes);
        let tc = match secular_after {
            Some(tc) if tc < *self.times.last().unwrap_or(&0.0) => tc,
            _ => return open_moments(h, hsr, &rho0, origin, &self.times, &cfg.ode, cfg.edge_threshold),
        };
        let split = self.times.partition_point(|&t| t <= tc);
        let mut early: Vec<f64> = self.times[..split].to_vec();
        early.push(tc);
        let mut rho_c: Vec<Complex64> = Vec::new();
        let mut mt = {
            use crate::open::hsr::{lindblad_observe, rho_moments};
            let mut m = MomentTrace {
                times: early.clone(),
                m1: vec![0.0; early.len()],
                m2: vec![0.0; early.len()],
                dm1: vec![0.0; early.len()],
                dm2: vec![0.0; early.len()],
                ..Default::default()
            };
            let n = h.dim();
            let last = early.len() - 1;
            lindblad_observe(h, hsr, &rho0, &early, &cfg.ode, |i, _, rho| {
                let v = rho_moments(h, rho, origin);
                m.m1[i] = v[0];
                m.m2[i] = v[1];
                m.dm1[i] = v[2];
                m.dm2[i] = v[3];
                m.max_edge_population = m.max_edge_population.max(rho[0].re.max(rho[n * n - 1].re));
                if i == last {
                    rho_c = rho.to_vec();
                }
                Ok(())
            })?;
            m
        };
        let rho_eig = to_eigenbasis(es, &rho_c);
        let n = es.dim();
        let p: Vec<f64> = (0..n).map(|i| rho_eig[i * n + i].re.max(0.0)).collect();
        let late_t: Vec<f64> = self.times[split..].iter().map(|t| t - tc).collect();
        let late = secular_moments(es, hsr, &p, origin, &late_t)?;
        for v in [&mut mt.m1, &mut mt.m2, &mut mt.dm1, &mut mt.dm2] {
            v.pop();
        }
        mt.times = self.times.clone();
        mt.m1.extend(late.m1);
        mt.m2.extend(late.m2);
        mt.dm1.extend(late.dm1);
        mt.dm2.extend(late.dm2);
        if let Some(threshold) = cfg.edge_threshold {
            if mt.max_edge_population > threshold {
                return Err(Error::BoundaryReached {
                    population: mt.max_edge_population,
                    threshold,
                });
            }
        }
        Ok(mt)
    }

    fn time_sample(&self, mt: MomentTrace) -> Sample {
        let k = self.layout.k;
        let mut curve = Vec::with_capacity(mt.len() * k);
        let mut raw = Vec::with_capacity(mt.len());
        for i in 0..mt.len() {
            curve.extend_from_slice(&[mt.m1[i], mt.m2[i], mt.dm1[i], mt.dm2[i]]);
            if k == 6 {
                curve.extend_from_slice(&[mt.ddm1[i], mt.ddm2[i]]);
            }
            raw.push(0.5 * (mt.dm2[i] - 2.0 * mt.m1[i] * mt.dm1[i]));
        }
        Sample {
            curve,
            scalars: vec![mt.max_edge_population],
            hist: None,
            raw,
        }
    }

    fn empty(&self) -> Partial {
        Partial {
            curve: CoMoments::new(self.layout.points, self.layout.k),
            scalars: CoMoments::new(1, self.layout.n_scalars),
            hist: None,
            raw: Vec::new(),
            failures: Vec::new(),
        }
    }

    fn push(&self, part: &mut Partial, index: u64, s: Sample) -> Result<()> {
        part.curve.push(&s.curve)?;
        part.scalars.push(&s.scalars)?;
        if let Some(h) = s.hist {
            match &mut part.hist {
                Some(acc) => acc.merge(&h)?,
                None => part.hist = Some(h),
            }
        }
        if self.cfg.keep_raw {
            part.raw.push(RawRecord { index, values: s.raw });
        }
        Ok(())
    }

    fn leaf(&self, lo: u64, hi: u64) -> Result<Partial> {
        let m = self.cfg.n_realizations;
        let mut part = self.empty();
        for i in lo..hi {
            match self.sample(i) {
                Ok(s) => self.push(&mut part, i, s)?,
                Err(e) => {
                    let alt = m + i;
                    let replaced_by = match self.sample(alt) {
                        Ok(s) => {
                            self.push(&mut part, alt, s)?;
                            Some(alt)
                        }
                        Err(_) => None,
                    };
                    part.failures.push(FailureRecord {
                        index: i,
                        message: e.to_string(),
                        replaced_by,
                    });
                }
            }
            if self.cfg.progress {
                let d = self.done.fetch_add(1, Ordering::Relaxed) + 1;
                if d as u64 == m || d.is_multiple_of(100) {
                    eprint!("\r{d}/{m}");
                    if d as u64 == m {
                        eprintln!();
                    }
                }
            }
        }
        Ok(part)
    }

    fn reduce(&self, lo: u64, hi: u64) -> Result<Partial> {
        if hi - lo <= LEAF {
            return self.leaf(lo, hi);
        }
        let mid = lo + (hi - lo) / 2;
        let (a, b) = rayon::join(|| self.reduce(lo, mid), || self.reduce(mid, hi));
        a?.merge(b?)
    }

    fn finish(&self, part: Partial) -> Result<EnsembleStats> {
        let cfg = self.cfg;
        let m = cfg.n_realizations;
        if part.failures.len() as f64 > MAX_FAILURE_RATE * m as f64 || part.curve.count() == 0 {
            return Err(Error::EnsembleAborted {
                failures: part.failures.len(),
                attempted: m as usize,
                first: part.failures.first().map(|f| format!("realization {}: {}", f.index, f.message)).unwrap_or_default(),
            });
        }
        let acc = &part.curve;
        let mut channels = BTreeMap::new();
        let mut scalars = BTreeMap::new();
        let (axis, mean, stderr) = match &cfg.experiment {
            Experiment::StationaryDistribution => {
                let n = cfg.spec.n_sites() as i64;
                let axis = (-(n - 1)..n).map(|m| m as f64).collect();
                let w2 = part.scalars.mean(0, 0);
                let w2_err = part.scalars.linear_stderr(0, &[(0, 1.0)]);
                let w = w2.max(0.0).sqrt();
                scalars.insert(
                    "width".into(),
                    Scalar {
                        mean: w,
                        stderr: if w > 0.0 { w2_err / (2.0 * w) } else { 0.0 },
                    },
                );
                scalars.insert(
                    "width_per_realization".into(),
                    Scalar {
                        mean: part.scalars.mean(0, 1),
                        stderr: part.scalars.linear_stderr(0, &[(1, 1.0)]),
                    },
                );
                (axis, acc.means_of(0), acc.stderr_of(0))
            }
            Experiment::EigenWidths { bin_edges } => {
                let widths: Vec<f64> = bin_edges.windows(2).map(|w| w[1] - w[0]).collect();
                let axis = bin_edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
                let mean = acc.means_of(0).iter().zip(&widths).map(|(f, w)| f / w).collect();
                let err = acc.stderr_of(0).iter().zip(&widths).map(|(f, w)| f / w).collect();
                channels.insert(
                    "fraction".into(),
                    Channel {
                        mean: acc.means_of(0),
                        stderr: acc.stderr_of(0),
                    },
                );
                scalars.insert(
                    "mean_width".into(),
                    Scalar {
                        mean: part.scalars.mean(0, 0),
                        stderr: part.scalars.linear_stderr(0, &[(0, 1.0)]),
                    },
                );
                (axis, mean, err)
            }
            _ => {
                for (v, name) in ["m1", "m2", "dm1", "dm2", "ddm1", "ddm2"].iter().enumerate().take(acc.vars()) {
                    channels.insert(
                        name.to_string(),
                        Channel {
                            mean: acc.means_of(v),
                            stderr: acc.stderr_of(v),
                        },
                    );
                }
                let pts = acc.points();
                let (mut d, mut de, mut msd, mut msde) = (vec![0.0; pts], vec![0.0; pts], vec![0.0; pts], vec![0.0; pts]);
                for p in 0..pts {
                    let (m1, m2, dm1, dm2) = (acc.mean(p, 0), acc.mean(p, 1), acc.mean(p, 2), acc.mean(p, 3));
                    d[p] = 0.5 * (dm2 - 2.0 * m1 * dm1);
                    de[p] = acc.linear_stderr(p, &[(0, -dm1), (2, -m1), (3, 0.5)]);
                    msd[p] = m2 - m1 * m1;
                    msde[p] = acc.linear_stderr(p, &[(0, -2.0 * m1), (1, 1.0)]);
                }
                channels.insert("msd".into(), Channel { mean: msd, stderr: msde });
                if acc.vars() == 6 {
                    let (mut r, mut re) = (vec![0.0; pts], vec![0.0; pts]);
                    for p in 0..pts {
                        let (m1, dm1, ddm1, ddm2) = (acc.mean(p, 0), acc.mean(p, 2), acc.mean(p, 4), acc.mean(p, 5));
                        r[p] = 0.5 * (ddm2 - 2.0 * dm1 * dm1 - 2.0 * m1 * ddm1);
                        re[p] = acc.linear_stderr(p, &[(0, -ddm1), (2, -2.0 * dm1), (4, -m1), (5, 0.5)]);
                    }
                    channels.insert("d_rate".into(), Channel { mean: r, stderr: re });
                }
                scalars.insert(
                    "max_edge_population".into(),
                    Scalar {
                        mean: part.scalars.mean(0, 0),
                        stderr: part.scalars.linear_stderr(0, &[(0, 1.0)]),
                    },
                );
                (self.times.clone(), d, de)
            }
        };
        if let Some(bad) = mean.iter().chain(&stderr).find(|v: &&f64| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite ensemble statistic {bad}")));
        }
        Ok(EnsembleStats {
            experiment: cfg.experiment.name().into(),
            axis,
            mean,
            stderr,
            channels,
            scalars,
            histogram: part.hist,
            n_requested: m,
            m_effective: acc.count(),
            failures: part.failures,
            raw: cfg.keep_raw.then_some(part.raw),
        })
    }
}

pub fn run_ensemble(cfg: &EnsembleConfig) -> Result<EnsembleStats> {
    cfg.validate()?;
    let runner = Runner::new(cfg);
    let part = match cfg.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("cannot build thread pool: {e}")))?
            .install(|| runner.reduce(0, cfg.n_realizations))?,
        None => runner.reduce(0, cfg.n_realizations)?,
    };
    runner.finish(part)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Sigma,
    Gamma,
    WidthW,
}

/// Config for one sweep value, seeded by (master_seed, value_index).
pub fn sweep_config(cfg: &EnsembleConfig, parameter: SweepParameter, value: f64, value_index: u64) -> Result<EnsembleConfig> {
    let mut c = cfg.clone();
    c.master_seed = derive_seed(cfg.master_seed, value_index);
    match parameter {
        SweepParameter::Sigma => c.spec = cfg.spec.with_sigma(value)?,
        SweepParameter::Gamma => {
            let hsr = HsrParams::new(value)?;
            match &mut c.experiment {
                Experiment::OpenDiffusivity { hsr: h, .. } | Experiment::SecularDiffusivity { hsr: h } => *h = hsr,
                other => {
                    return Err(Error::InvalidArgument(format!("gamma sweep needs a dephasing experiment, got {}", other.name())));
                }
            }
        }
        SweepParameter::WidthW => {
            if !(value > 0.0) {
                return Err(Error::InvalidArgument(format!("gaussian width must be > 0, got {value}")));
            }
            c.initial = InitialKind::Gaussian {
                n0: cfg.initial.center(),
                w: value,
            };
        }
    }
    Ok(c)
}

pub fn sweep(cfg: &EnsembleConfig, parameter: SweepParameter, values: &[f64]) -> Result<Vec<EnsembleStats>> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("sweep needs at least one value".into()));
    }
    values
        .iter()
        .enumerate()
        .map(|(i, &v)| run_ensemble(&sweep_config(cfg, parameter, v, i as u64)?))
        .collect()
}
