use lattice_transport::analysis::{first_extremum, interpolate, Extremum};
use lattice_transport::closed::{InitialKind, TimeGrid};
use lattice_transport::dimer::{
    dimer_diffusivity_asymptotic, dimer_diffusivity_exact_grid, turnover_diffusivity, turnover_time, AsymptoticPrefactor, DimerParams,
};
use lattice_transport::ensemble::{run_ensemble, sweep, EnsembleConfig, EnsembleStats, Experiment, SweepParameter};
use lattice_transport::lattice::LatticeSpec;
use lattice_transport::open::{hsr_dimer_asymptotic, hsr_dimer_exact_grid, HsrParams};
use lattice_transport::special::QuadratureSettings;
use lattice_transport::widths::WidthHistogram;

use crate::config::{CommandKind, Config, ExperimentKind, InitialStateKind, SweepParam};
use crate::manifest::EnsembleRecord;
use crate::table::Table;

pub struct Outputs {
    pub tables: Vec<(String, Table)>,
    pub ensembles: Vec<EnsembleRecord>,
}

type Res<T> = Result<T, String>;

fn s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

pub fn run(kind: CommandKind, c: &Config, progress: bool) -> Res<Outputs> {
    match kind {
        CommandKind::Eigens | CommandKind::Stationary | CommandKind::DiffuseClosed | CommandKind::DiffuseOpen => single(c, progress),
        CommandKind::Turnover => turnover(c, progress),
        CommandKind::Dimer => dimer(c),
        CommandKind::Sweep => run_sweep(c, progress),
    }
}

fn experiment(c: &Config) -> Res<Experiment> {
    let hsr = || HsrParams::new(c.gamma).map_err(s);
    Ok(match c.experiment {
        ExperimentKind::Eigens => {
            let bins = ((c.width_max / c.bin_width).round() as usize).max(1);
            Experiment::EigenWidths {
                bin_edges: WidthHistogram::uniform_edges(0.0, c.width_max, bins),
            }
        }
        ExperimentKind::Stationary => Experiment::StationaryDistribution,
        ExperimentKind::DiffuseClosed => Experiment::ClosedDiffusivity,
        ExperimentKind::DiffuseOpen => Experiment::OpenDiffusivity {
            hsr: hsr()?,
            secular_after: c.secular_after,
        },
        ExperimentKind::Secular => Experiment::SecularDiffusivity { hsr: hsr()? },
    })
}

fn ensemble_config(c: &Config, sigma: f64, progress: bool) -> Res<EnsembleConfig> {
    let spec = LatticeSpec::new(c.n_sites, c.coupling, sigma).map_err(s)?;
    let mut e = EnsembleConfig::new(spec, c.realizations, c.seed, experiment(c)?);
    e.initial = match c.initial_state {
        InitialStateKind::Site => InitialKind::Site { n0: c.n0 },
        InitialStateKind::Gaussian => InitialKind::Gaussian {
            n0: c.n0,
            w: c.width_w.ok_or("gaussian start needs width_w")?,
        },
    };
    e.grid = TimeGrid::new(c.t_max, c.dt).map_err(s)?;
    e.ode = c.ode();
    e.threads = c.threads;
    e.progress = progress;
    Ok(e)
}

fn record(label: String, st: &EnsembleStats) -> EnsembleRecord {
    EnsembleRecord {
        label,
        requested: st.n_requested,
        used: st.m_effective,
        failed_indices: st.failures.iter().map(|f| f.index).collect(),
    }
}

fn diffusivity_table(st: &EnsembleStats) -> Res<Table> {
    let msd = st.channel("msd").map_err(s)?;
    Table::from_columns(vec![
        ("t_invJ", st.axis.clone()),
        ("D_mean_a2J", st.mean.clone()),
        ("D_stderr_a2J", st.stderr.clone()),
        ("msd_mean_a2", msd.mean.clone()),
        ("msd_stderr_a2", msd.stderr.clone()),
    ])
    .map_err(s)
}

fn single(c: &Config, progress: bool) -> Res<Outputs> {
    let st = run_ensemble(&ensemble_config(c, c.sigma, progress)?).map_err(s)?;
    let tables = match c.experiment {
        ExperimentKind::Eigens => {
            let frac = st.channel("fraction").map_err(s)?;
            let hist = st.histogram.as_ref().ok_or("width experiment returned no histogram")?;
            let mw = st.scalar("mean_width").map_err(s)?;
            let all = (hist.total + hist.underflow + hist.overflow).max(1) as f64;
            vec![
                (
                    "widths.csv".into(),
                    Table::from_columns(vec![
                        ("w_a", st.axis.clone()),
                        ("density_inv_a", st.mean.clone()),
                        ("density_stderr_inv_a", st.stderr.clone()),
                        ("fraction", frac.mean.clone()),
                        ("count", hist.counts.iter().map(|&k| k as f64).collect()),
                    ])
                    .map_err(s)?,
                ),
                (
                    "summary.csv".into(),
                    Table::from_columns(vec![
                        ("sigma_J", vec![c.sigma]),
                        ("mean_width_a", vec![mw.mean]),
                        ("mean_width_stderr_a", vec![mw.stderr]),
                        ("overflow_fraction", vec![hist.overflow as f64 / all]),
                    ])
                    .map_err(s)?,
                ),
            ]
        }
        ExperimentKind::Stationary => {
            let w = st.scalar("width").map_err(s)?;
            vec![
                (
                    "distribution.csv".into(),
                    Table::from_columns(vec![("m_a", st.axis.clone()), ("P", st.mean.clone()), ("P_stderr", st.stderr.clone())]).map_err(s)?,
                ),
                (
                    "width.csv".into(),
                    Table::from_columns(vec![("sigma_J", vec![c.sigma]), ("W_a", vec![w.mean]), ("W_stderr_a", vec![w.stderr])]).map_err(s)?,
                ),
            ]
        }
        _ => vec![("diffusivity.csv".into(), diffusivity_table(&st)?)],
    };
    Ok(Outputs {
        tables,
        ensembles: vec![record(c.experiment_label(), &st)],
    })
}

/// First downward zero of the rate, linearly interpolated.
fn first_turnover(t: &[f64], rate: &[f64]) -> Option<f64> {
    (1..rate.len())
        .find(|&i| rate[i - 1] > 0.0 && rate[i] <= 0.0)
        .map(|i| t[i - 1] + (t[i] - t[i - 1]) * rate[i - 1] / (rate[i - 1] - rate[i]))
}

fn turnover(c: &Config, progress: bool) -> Res<Outputs> {
    let mut summary = Table::new([
        "sigma_J",
        "tp_chain_invJ",
        "D_tp_chain_a2J",
        "D_tp_chain_stderr_a2J",
        "tp_dimer_invJ",
        "D_tp_dimer_a2J",
        "tp_formula_invJ",
        "D_tp_formula_a2J",
    ]);
    let mut curves = Table::new(["sigma_J", "t_invJ", "D_mean_a2J", "D_stderr_a2J", "D_dimer_a2J"]);
    let mut ensembles = Vec::new();
    for &sigma in &c.sigmas {
        let mut e = ensemble_config(c, sigma, progress)?;
        e.second_derivatives = true;
        let st = run_ensemble(&e).map_err(s)?;
        let t = st.times();
        let rate = &st.channel("d_rate").map_err(s)?.mean;
        let tp = first_turnover(t, rate).ok_or_else(|| format!("sigma={sigma}: chain diffusivity has no maximum before t_max={}", c.t_max))?;
        let params = DimerParams::new(c.coupling, sigma).map_err(s)?;
        let exact = dimer_diffusivity_exact_grid(&params, t, &QuadratureSettings::default()).map_err(s)?;
        let (tp_dimer, d_dimer) = first_extremum(t, &exact, Extremum::Max, 0.0).ok_or_else(|| format!("sigma={sigma}: dimer diffusivity has no maximum before t_max"))?;
        let tp_formula = turnover_time(&params).map_err(s)?;
        summary
            .push(vec![
                sigma,
                tp,
                interpolate(t, &st.mean, tp).map_err(s)?,
                interpolate(t, &st.stderr, tp).map_err(s)?,
                tp_dimer,
                d_dimer,
                tp_formula,
                turnover_diffusivity(&params, tp_formula).map_err(s)?,
            ])
            .map_err(s)?;
        for i in 0..t.len() {
            curves.push(vec![sigma, t[i], st.mean[i], st.stderr[i], exact[i]]).map_err(s)?;
        }
        ensembles.push(record(format!("sigma={sigma}"), &st));
    }
    Ok(Outputs {
        tables: vec![("turnover.csv".into(), summary), ("curves.csv".into(), curves)],
        ensembles,
    })
}

fn dimer(c: &Config) -> Res<Outputs> {
    // The asymptotic form diverges at t = 0, so the grid starts at dt.
    let times: Vec<f64> = TimeGrid::new(c.t_max, c.dt).map_err(s)?.times().into_iter().filter(|&t| t > 0.0).collect();
    let params = DimerParams::new(c.coupling, c.sigma).map_err(s)?;
    let settings = QuadratureSettings::default();
    let (exact, asym) = if c.gamma == 0.0 {
        let exact = dimer_diffusivity_exact_grid(&params, &times, &settings).map_err(s)?;
        let asym = times
            .iter()
            .map(|&t| dimer_diffusivity_asymptotic(&params, t, AsymptoticPrefactor::default()))
            .collect::<Result<Vec<_>, _>>()
            .map_err(s)?;
        (exact, asym)
    } else {
        let exact = hsr_dimer_exact_grid(c.coupling, c.sigma, c.gamma, &times, &settings).map_err(s)?;
        let asym = times
            .iter()
            .map(|&t| hsr_dimer_asymptotic(c.coupling, c.sigma, c.gamma, t).map(|a| a.total))
            .collect::<Result<Vec<_>, _>>()
            .map_err(s)?;
        (exact, asym)
    };
    let turn = times.iter().map(|&t| turnover_diffusivity(&params, t)).collect::<Result<Vec<_>, _>>().map_err(s)?;
    let table = Table::from_columns(vec![("t_invJ", times), ("D_exact_a2J", exact), ("D_asym_a2J", asym), ("D_turnover_a2J", turn)]).map_err(s)?;
    Ok(Outputs {
        tables: vec![("dimer.csv".into(), table)],
        ensembles: Vec::new(),
    })
}

fn run_sweep(c: &Config, progress: bool) -> Res<Outputs> {
    let param = c.sweep_parameter.ok_or("sweep needs sweep_parameter")?;
    let base = ensemble_config(c, c.sigma, progress)?;
    let core_param = match param {
        SweepParam::Sigma => SweepParameter::Sigma,
        SweepParam::Gamma => SweepParameter::Gamma,
        SweepParam::WidthW => SweepParameter::WidthW,
    };
    let stats = sweep(&base, core_param, &c.sweep_values).map_err(s)?;
    let col = param.column();
    let table = match c.experiment {
        ExperimentKind::Stationary | ExperimentKind::Eigens => {
            let (key, names) = if c.experiment == ExperimentKind::Stationary {
                ("width", ["W_a", "W_stderr_a"])
            } else {
                ("mean_width", ["mean_width_a", "mean_width_stderr_a"])
            };
            let mut t = Table::new([col, names[0], names[1]]);
            for (v, st) in c.sweep_values.iter().zip(&stats) {
                let w = st.scalar(key).map_err(s)?;
                t.push(vec![*v, w.mean, w.stderr]).map_err(s)?;
            }
            t
        }
        _ => {
            let mut t = Table::new([col, "t_invJ", "D_mean_a2J", "D_stderr_a2J"]);
            for (v, st) in c.sweep_values.iter().zip(&stats) {
                for i in 0..st.axis.len() {
                    t.push(vec![*v, st.axis[i], st.mean[i], st.stderr[i]]).map_err(s)?;
                }
            }
            t
        }
    };
    let ensembles = c
        .sweep_values
        .iter()
        .zip(&stats)
        .map(|(v, st)| record(format!("{col}={v}"), st))
        .collect();
    Ok(Outputs {
        tables: vec![("sweep.csv".into(), table)],
        ensembles,
    })
}

impl Config {
    fn experiment_label(&self) -> String {
        format!("{:?}", self.experiment).to_lowercase()
    }
}
