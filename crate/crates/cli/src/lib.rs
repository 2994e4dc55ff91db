//! `lattice` command-line front end: configuration, CSV output and run manifests.

pub mod config;
pub mod manifest;
pub mod table;

mod commands;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use config::{load_config, CommandKind, Config, ConfigError, ConfigFile, ExperimentKind, InitialStateKind, Sources, SweepParam};
use manifest::{RunManifest, MANIFEST_FILE};
use table::{checksum, write_csv};

#[derive(Debug, Parser)]
#[command(name = "lattice", version, about = "Transport in disordered tight-binding chains")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Eigenstate width histogram.
    Eigens {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        hist: HistogramArgs,
    },
    /// Infinite-time distribution and its width.
    Stationary {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Ensemble diffusivity of the closed chain.
    DiffuseClosed {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Short-time diffusivity peak of the chain against the dimer model.
    Turnover {
        #[command(flatten)]
        common: CommonArgs,
        /// Disorder strengths to scan, comma separated.
        #[arg(long, value_delimiter = ',', num_args = 1.., allow_negative_numbers = true)]
        sigmas: Option<Vec<f64>>,
    },
    /// Ensemble diffusivity under pure dephasing.
    DiffuseOpen {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        open: OpenArgs,
    },
    /// Analytic random-dimer curves.
    Dimer {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Repeats one experiment over a list of parameter values.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum)]
        param: Option<SweepParam>,
        /// Parameter values, comma separated.
        #[arg(long, value_delimiter = ',', num_args = 1.., allow_negative_numbers = true)]
        values: Option<Vec<f64>>,
        #[command(flatten)]
        open: OpenArgs,
        #[command(flatten)]
        hist: HistogramArgs,
    },
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Flat key/value config file; flags take precedence.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Output directory; default runs/<timestamp>-<config hash>.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Plain progress counter on standard error.
    #[arg(long)]
    pub progress: bool,
    #[arg(long = "n", alias = "n-sites")]
    pub n_sites: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub coupling: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub sigma: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub realizations: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, allow_negative_numbers = true)]
    pub t_max: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub dt: Option<f64>,
    #[arg(long, value_enum)]
    pub initial_state: Option<InitialStateKind>,
    #[arg(long, allow_negative_numbers = true)]
    pub width_w: Option<f64>,
    #[arg(long)]
    pub n0: Option<usize>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub rtol: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub atol: Option<f64>,
}

#[derive(Debug, Args)]
pub struct OpenArgs {
    #[arg(long, value_enum)]
    pub experiment: Option<ExperimentKind>,
    /// Switch to the rate model after this time.
    #[arg(long, allow_negative_numbers = true)]
    pub secular_after: Option<f64>,
}

#[derive(Debug, Args)]
pub struct HistogramArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub bin_width: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub width_max: Option<f64>,
}

impl CommonArgs {
    fn layer(&self) -> ConfigFile {
        ConfigFile {
            n_sites: self.n_sites,
            coupling: self.coupling,
            sigma: self.sigma,
            gamma: self.gamma,
            realizations: self.realizations,
            seed: self.seed,
            t_max: self.t_max,
            dt: self.dt,
            initial_state: self.initial_state,
            width_w: self.width_w,
            n0: self.n0,
            threads: self.threads,
            rtol: self.rtol,
            atol: self.atol,
            ..Default::default()
        }
    }
}

impl OpenArgs {
    fn apply(&self, l: &mut ConfigFile) {
        l.experiment = self.experiment;
        l.secular_after = self.secular_after;
    }
}

impl HistogramArgs {
    fn apply(&self, l: &mut ConfigFile) {
        l.bin_width = self.bin_width;
        l.width_max = self.width_max;
    }
}

impl Command {
    fn split(&self) -> (CommandKind, &CommonArgs, ConfigFile) {
        match self {
            Command::Eigens { common, hist } => {
                let mut l = common.layer();
                hist.apply(&mut l);
                (CommandKind::Eigens, common, l)
            }
            Command::Stationary { common } => (CommandKind::Stationary, common, common.layer()),
            Command::DiffuseClosed { common } => (CommandKind::DiffuseClosed, common, common.layer()),
            Command::Turnover { common, sigmas } => {
                let mut l = common.layer();
                l.sigmas = sigmas.clone();
                (CommandKind::Turnover, common, l)
            }
            Command::DiffuseOpen { common, open } => {
                let mut l = common.layer();
                open.apply(&mut l);
                (CommandKind::DiffuseOpen, common, l)
            }
            Command::Dimer { common } => (CommandKind::Dimer, common, common.layer()),
            Command::Sweep {
                common,
                param,
                values,
                open,
                hist,
            } => {
                let mut l = common.layer();
                l.sweep_parameter = *param;
                l.sweep_values = values.clone();
                open.apply(&mut l);
                hist.apply(&mut l);
                (CommandKind::Sweep, common, l)
            }
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "{e}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

/// Parses the file and flag layers into the configuration that will run.
pub fn resolve_config(cmd: &Command) -> Result<(CommandKind, Config), CliError> {
    let (kind, common, flags) = cmd.split();
    let (file, text) = match &common.config {
        Some(p) => {
            let (f, t) = load_config(p).map_err(CliError::Config)?;
            (f, Some(t))
        }
        None => (ConfigFile::default(), None),
    };
    let src = Sources {
        path: common.config.as_deref(),
        text: text.as_deref(),
        flags: &flags,
    };
    let merged = file.overlay(flags.clone());
    let cfg = Config::resolve(kind, &merged, &src).map_err(CliError::Config)?;
    Ok((kind, cfg))
}

fn default_out_dir(kind: CommandKind, cfg: &Config, stamp: &chrono::DateTime<chrono::Utc>) -> PathBuf {
    let hash = checksum(format!("{}\n{}", kind.name(), cfg.to_toml()).as_bytes());
    Path::new("runs").join(format!("{}-{}", stamp.format("%Y%m%dT%H%M%SZ"), &hash[..8]))
}

/// Runs a parsed command; returns the output directory.
pub fn execute(cli: &Cli) -> Result<PathBuf, CliError> {
    let (kind, cfg) = resolve_config(&cli.command)?;
    let (_, common, _) = cli.command.split();
    let started = chrono::Utc::now();
    let out = common.out.clone().unwrap_or_else(|| default_out_dir(kind, &cfg, &started));
    let result = commands::run(kind, &cfg, common.progress).map_err(CliError::Runtime)?;
    std::fs::create_dir_all(&out).map_err(|e| CliError::Runtime(format!("{}: {e}", out.display())))?;
    let mut outputs = BTreeMap::new();
    for (name, table) in &result.tables {
        let sum = write_csv(table, &out.join(name)).map_err(|e| CliError::Runtime(e.to_string()))?;
        outputs.insert(name.clone(), sum);
    }
    let manifest = RunManifest {
        tool_version: format!("lattice {}", env!("CARGO_PKG_VERSION")),
        command: kind.name().into(),
        master_seed: cfg.seed,
        started: started.to_rfc3339(),
        finished: chrono::Utc::now().to_rfc3339(),
        config: cfg,
        outputs,
        ensembles: result.ensembles,
    };
    let text = manifest.to_toml().map_err(|e| CliError::Runtime(format!("manifest: {e}")))?;
    let path = out.join(MANIFEST_FILE);
    std::fs::write(&path, text).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    Ok(out)
}

/// Full entry point: exit code 0 on success, 1 on runtime failure, 2 on usage or config errors.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(dir) => {
            println!("{}", dir.display());
            0
        }
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
