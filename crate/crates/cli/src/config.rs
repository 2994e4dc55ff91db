//! Flat key/value run configuration: file values, flag overrides, resolution.

use std::fmt;
use std::path::Path;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use lattice_transport::ode::OdeOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Eigens,
    Stationary,
    DiffuseClosed,
    DiffuseOpen,
    /// Population-only rate model for dephased dynamics.
    Secular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum InitialStateKind {
    Site,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Sigma,
    Gamma,
    #[value(name = "width_w", alias = "width-w")]
    WidthW,
}

impl SweepParam {
    /// CSV column label, with units.
    pub fn column(&self) -> &'static str {
        match self {
            SweepParam::Sigma => "sigma_J",
            SweepParam::Gamma => "gamma_J",
            SweepParam::WidthW => "width_w_a",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Eigens,
    Stationary,
    DiffuseClosed,
    Turnover,
    DiffuseOpen,
    Dimer,
    Sweep,
}

impl CommandKind {
    pub fn name(&self) -> &'static str {
        match self {
            CommandKind::Eigens => "eigens",
            CommandKind::Stationary => "stationary",
            CommandKind::DiffuseClosed => "diffuse-closed",
            CommandKind::Turnover => "turnover",
            CommandKind::DiffuseOpen => "diffuse-open",
            CommandKind::Dimer => "dimer",
            CommandKind::Sweep => "sweep",
        }
    }

    fn default_experiment(&self) -> ExperimentKind {
        match self {
            CommandKind::Eigens => ExperimentKind::Eigens,
            CommandKind::Stationary | CommandKind::Sweep => ExperimentKind::Stationary,
            CommandKind::DiffuseClosed | CommandKind::Turnover | CommandKind::Dimer => ExperimentKind::DiffuseClosed,
            CommandKind::DiffuseOpen => ExperimentKind::DiffuseOpen,
        }
    }

    fn accepts(&self, e: ExperimentKind) -> bool {
        match self {
            CommandKind::Sweep | CommandKind::Dimer => true,
            CommandKind::DiffuseOpen => matches!(e, ExperimentKind::DiffuseOpen | ExperimentKind::Secular),
            CommandKind::Turnover => e == ExperimentKind::DiffuseClosed,
            _ => e == self.default_experiment(),
        }
    }
}

/// Every key is optional; used both for the file and for flag overrides.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub n_sites: Option<usize>,
    pub coupling: Option<f64>,
    pub sigma: Option<f64>,
    pub gamma: Option<f64>,
    pub realizations: Option<u64>,
    pub seed: Option<u64>,
    pub t_max: Option<f64>,
    pub dt: Option<f64>,
    pub initial_state: Option<InitialStateKind>,
    pub width_w: Option<f64>,
    pub n0: Option<usize>,
    pub experiment: Option<ExperimentKind>,
    pub secular_after: Option<f64>,
    pub threads: Option<usize>,
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
    pub bin_width: Option<f64>,
    pub width_max: Option<f64>,
    pub sigmas: Option<Vec<f64>>,
    pub sweep_parameter: Option<SweepParam>,
    pub sweep_values: Option<Vec<f64>>,
}

macro_rules! overlay_fields {
    ($base:expr, $top:expr, $($f:ident),*) => {
        ConfigFile { $($f: $top.$f.or($base.$f)),* }
    };
}

impl ConfigFile {
    /// Values in `top` win.
    pub fn overlay(self, top: ConfigFile) -> ConfigFile {
        overlay_fields!(
            self, top, n_sites, coupling, sigma, gamma, realizations, seed, t_max, dt, initial_state, width_w, n0, experiment,
            secular_after, threads, rtol, atol, bin_width, width_max, sigmas, sweep_parameter, sweep_values
        )
    }
}

/// Fully resolved configuration, recorded verbatim in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub n_sites: usize,
    pub coupling: f64,
    pub sigma: f64,
    pub gamma: f64,
    pub realizations: u64,
    pub seed: u64,
    pub t_max: f64,
    pub dt: f64,
    pub initial_state: InitialStateKind,
    pub width_w: Option<f64>,
    pub n0: usize,
    pub experiment: ExperimentKind,
    pub secular_after: Option<f64>,
    pub threads: Option<usize>,
    pub rtol: f64,
    pub atol: f64,
    pub bin_width: f64,
    pub width_max: f64,
    pub sigmas: Vec<f64>,
    pub sweep_parameter: Option<SweepParam>,
    pub sweep_values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub field: Option<String>,
    /// Where the offending value came from, e.g. "run.toml line 3" or "flag --sigma".
    pub origin: Option<String>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error")?;
        if let Some(o) = &self.origin {
            write!(f, " at {o}")?;
        }
        if let Some(k) = &self.field {
            write!(f, ", field `{k}`")?;
        }
        write!(f, ": {}", self.message)
    }
}

impl std::error::Error for ConfigError {}

/// Parsed file text plus the flag layer, for locating the source of a value.
pub struct Sources<'a> {
    pub path: Option<&'a Path>,
    pub text: Option<&'a str>,
    pub flags: &'a ConfigFile,
}

impl Sources<'_> {
    fn origin(&self, field: &str) -> Option<String> {
        if flag_set(self.flags, field) {
            return Some(format!("flag --{}", field.replace('_', "-")));
        }
        let text = self.text?;
        let line = text.lines().position(|l| {
            let l = l.trim_start();
            l.strip_prefix(field).is_some_and(|rest| rest.trim_start().starts_with('='))
        })?;
        let name = self.path.map(|p| p.display().to_string()).unwrap_or_else(|| "config".into());
        Some(format!("{name} line {}", line + 1))
    }

    fn error(&self, field: &str, message: impl Into<String>) -> ConfigError {
        ConfigError {
            field: Some(field.into()),
            origin: self.origin(field),
            message: message.into(),
        }
    }
}

fn flag_set(flags: &ConfigFile, field: &str) -> bool {
    match toml::Value::try_from(flags) {
        Ok(toml::Value::Table(t)) => t.contains_key(field),
        _ => false,
    }
}

/// Parses config text; errors carry the line and offending key.
pub fn parse_config(text: &str, path: Option<&Path>) -> Result<ConfigFile, ConfigError> {
    toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
        let name = path.map(|p| p.display().to_string()).unwrap_or_else(|| "config".into());
        let field = e.span().and_then(|s| {
            let l = text[..s.start.min(text.len())].rsplit('\n').next().unwrap_or("").to_string() + &text[s.start.min(text.len())..];
            l.split('=').next().map(|k| k.trim().to_string()).filter(|k| !k.is_empty() && !k.contains(char::is_whitespace))
        });
        ConfigError {
            field,
            origin: Some(match line {
                Some(l) => format!("{name} line {l}"),
                None => name,
            }),
            message: e.message().trim().to_string(),
        }
    })
}

pub fn load_config(path: &Path) -> Result<(ConfigFile, String), ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
        field: None,
        origin: Some(path.display().to_string()),
        message: format!("cannot read config file: {e}"),
    })?;
    Ok((parse_config(&text, Some(path))?, text))
}

impl Config {
    /// Applies command-specific defaults and validates every field.
    pub fn resolve(cmd: CommandKind, merged: &ConfigFile, src: &Sources) -> Result<Config, ConfigError> {
        let wide = matches!(cmd, CommandKind::Eigens | CommandKind::Stationary);
        let (t_max_default, dt_default) = if cmd == CommandKind::Turnover { (0.5, 0.001) } else { (20.0, 0.01) };
        let ode = OdeOptions::default();
        let n_sites = merged.n_sites.unwrap_or(if wide { 201 } else { 21 });
        let experiment = merged.experiment.unwrap_or(cmd.default_experiment());
        let c = Config {
            n_sites,
            coupling: merged.coupling.unwrap_or(1.0),
            sigma: merged.sigma.unwrap_or(20.0),
            gamma: merged.gamma.unwrap_or(0.0),
            realizations: merged.realizations.unwrap_or(1000),
            seed: merged.seed.unwrap_or(7),
            t_max: merged.t_max.unwrap_or(t_max_default),
            dt: merged.dt.unwrap_or(dt_default),
            initial_state: merged.initial_state.unwrap_or(InitialStateKind::Site),
            width_w: merged.width_w,
            n0: merged.n0.unwrap_or(n_sites / 2),
            experiment,
            secular_after: merged.secular_after,
            threads: merged.threads,
            rtol: merged.rtol.unwrap_or(ode.rtol),
            atol: merged.atol.unwrap_or(ode.atol),
            bin_width: merged.bin_width.unwrap_or(0.01),
            width_max: merged.width_max.unwrap_or(3.0),
            sigmas: merged.sigmas.clone().unwrap_or_else(|| vec![15.0, 20.0, 30.0]),
            sweep_parameter: merged.sweep_parameter,
            sweep_values: merged.sweep_values.clone().unwrap_or_default(),
        };
        c.validate(cmd, src)?;
        Ok(c)
    }

    fn validate(&self, cmd: CommandKind, src: &Sources) -> Result<(), ConfigError> {
        let positive = |field: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(src.error(field, format!("must be finite and > 0, got {v}")))
            }
        };
        let non_negative = |field: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(src.error(field, format!("must be finite and >= 0, got {v}")))
            }
        };
        if self.n_sites < 2 {
            return Err(src.error("n_sites", format!("need at least 2 sites, got {}", self.n_sites)));
        }
        if !(self.coupling.is_finite() && self.coupling != 0.0) {
            return Err(src.error("coupling", format!("must be finite and nonzero, got {}", self.coupling)));
        }
        non_negative("sigma", self.sigma)?;
        non_negative("gamma", self.gamma)?;
        if self.realizations == 0 {
            return Err(src.error("realizations", "must be >= 1"));
        }
        positive("t_max", self.t_max)?;
        positive("dt", self.dt)?;
        if self.dt > self.t_max {
            return Err(src.error("dt", format!("step {} exceeds t_max {}", self.dt, self.t_max)));
        }
        if self.n0 >= self.n_sites {
            return Err(src.error("n0", format!("site {} outside a chain of {} sites", self.n0, self.n_sites)));
        }
        match (self.initial_state, self.width_w) {
            (InitialStateKind::Gaussian, None) => return Err(src.error("width_w", "required when initial_state = \"gaussian\"")),
            (_, Some(w)) => positive("width_w", w)?,
            _ => {}
        }
        if let Some(tc) = self.secular_after {
            positive("secular_after", tc)?;
        }
        if self.threads == Some(0) {
            return Err(src.error("threads", "must be >= 1"));
        }
        positive("rtol", self.rtol)?;
        positive("atol", self.atol)?;
        positive("bin_width", self.bin_width)?;
        positive("width_max", self.width_max)?;
        if self.bin_width > self.width_max {
            return Err(src.error("bin_width", "exceeds width_max"));
        }
        if !cmd.accepts(self.experiment) {
            return Err(src.error("experiment", format!("`{}` cannot run a {:?} experiment", cmd.name(), self.experiment)));
        }
        match cmd {
            CommandKind::Dimer if self.sigma <= 0.0 => {
                return Err(src.error("sigma", "the dimer model needs sigma > 0"));
            }
            CommandKind::Turnover => {
                if self.sigmas.is_empty() {
                    return Err(src.error("sigmas", "need at least one value"));
                }
                for &s in &self.sigmas {
                    positive("sigmas", s)?;
                }
            }
            CommandKind::Sweep => {
                let p = self.sweep_parameter.ok_or_else(|| src.error("sweep_parameter", "required for sweep"))?;
                if self.sweep_values.is_empty() {
                    return Err(src.error("sweep_values", "need at least one value"));
                }
                for &v in &self.sweep_values {
                    match p {
                        SweepParam::Sigma | SweepParam::Gamma => non_negative("sweep_values", v)?,
                        SweepParam::WidthW => positive("sweep_values", v)?,
                    }
                }
                let dephased = matches!(self.experiment, ExperimentKind::DiffuseOpen | ExperimentKind::Secular);
                if p == SweepParam::Gamma && !dephased {
                    return Err(src.error("sweep_parameter", "a gamma sweep needs experiment = \"diffuse-open\" or \"secular\""));
                }
            }
            _ => {}
        }
        Ok(())
    }

    pub fn ode(&self) -> OdeOptions {
        OdeOptions {
            rtol: self.rtol,
            atol: self.atol,
            ..OdeOptions::default()
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
