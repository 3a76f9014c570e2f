//! Command implementations behind the `xcube` binary.

pub mod config;
pub mod presets;

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use xcube_core::analysis::{self, AnalysisOptions};
use xcube_core::code::code_info;
use xcube_core::ensemble::{run_disorder_point, EnsembleDir, RunControl};
use xcube_core::lattice::Lattice;
use xcube_core::models::{Disorder, ModelKind, RacatModel, RpiModel};
use xcube_core::oracle::{self, StateTable};

use config::{ConfigLayer, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("oracle check failed: {0}")]
    OracleFailed(String),
    #[error(transparent)]
    Core(#[from] xcube_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use xcube_core::Error as E;
        match self {
            CliError::Config(_) => exit::CONFIG,
            CliError::OracleFailed(_) => exit::ORACLE,
            CliError::Core(E::EquilibrationFailure { .. }) => exit::EQUILIBRATION,
            CliError::Core(E::SweepBudget { .. }) => exit::BUDGET,
            CliError::Core(E::Interrupted { .. }) => exit::INTERRUPTED,
            CliError::Core(E::OutOfRange { .. } | E::InvalidSize(_)) => exit::CONFIG,
            _ => exit::FAILURE,
        }
    }
}

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const EQUILIBRATION: i32 = 3;
    pub const BUDGET: i32 = 4;
    pub const ORACLE: i32 = 5;
    pub const INTERRUPTED: i32 = 130;
}

#[derive(Debug, Parser)]
#[command(name = "xcube", version, about = "Threshold Monte Carlo for the X-cube code")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one disorder point and write its ensemble directory.
    Simulate(Box<SimulateArgs>),
    /// Locate crossings and thresholds in a tree of ensemble directories.
    Analyze(AnalyzeArgs),
    /// Exact small-lattice checks.
    #[command(subcommand)]
    Oracle(OracleCommand),
    /// Stabilizer ranks and logical qubit count.
    CodeInfo {
        #[arg(long = "L", num_args = 1.., required = true)]
        sizes: Vec<usize>,
    },
    /// List preset names.
    Presets,
}

#[derive(Debug, Args, Default)]
pub struct SimulateArgs {
    /// Named parameter set, e.g. `rpi-p0.150-L8`.
    #[arg(long)]
    pub preset: Option<String>,
    /// JSON file with the same keys as the flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<ModelKind>,
    #[arg(long = "L")]
    pub size: Option<usize>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub n_temps: Option<usize>,
    #[arg(long)]
    pub t_min: Option<f64>,
    #[arg(long)]
    pub t_max: Option<f64>,
    /// `geometric` or `linear`.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub tau_max: Option<u32>,
    /// Number of disorder realizations.
    #[arg(long)]
    pub nd: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to `XCUBE_WORKERS`, then the core count.
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Sweeps between correlator measurements.
    #[arg(long)]
    pub stride: Option<u64>,
    #[arg(long)]
    pub overrelaxation: Option<u32>,
    #[arg(long)]
    pub bootstrap: Option<usize>,
    #[arg(long)]
    pub equilibration_sigma: Option<f64>,
    #[arg(long)]
    pub max_flagged_fraction: Option<f64>,
    #[arg(long)]
    pub checkpoint_interval: Option<u64>,
    #[arg(long)]
    pub dump_stride: Option<u64>,
    #[arg(long)]
    pub track_sg: Option<bool>,
    /// Stop with a checkpoint after this many sweeps in total.
    #[arg(long)]
    pub budget: Option<u64>,
}

impl SimulateArgs {
    fn flag_layer(&self) -> ConfigLayer {
        ConfigLayer {
            model: self.model,
            size: self.size,
            p: self.p,
            n_temps: self.n_temps,
            t_min: self.t_min,
            t_max: self.t_max,
            grid: self.grid.clone(),
            tau_max: self.tau_max,
            nd: self.nd,
            seed: self.seed,
            workers: self.workers,
            out: self.out.clone(),
            stride: self.stride,
            overrelaxation: self.overrelaxation,
            bootstrap: self.bootstrap,
            equilibration_sigma: self.equilibration_sigma,
            max_flagged_fraction: self.max_flagged_fraction,
            checkpoint_interval: self.checkpoint_interval,
            dump_stride: self.dump_stride,
            track_sg: self.track_sg,
            budget: self.budget,
        }
    }

    /// Preset, then config file, then flags.
    pub fn resolve(&self) -> Result<ResolvedRun, CliError> {
        let mut layer = ConfigLayer::default();
        if let Some(name) = &self.preset {
            let preset =
                presets::find(name).ok_or_else(|| CliError::Config(format!("`preset`: unknown preset {name:?}")))?;
            layer = ConfigLayer::from_preset(&preset);
        }
        let mut overrides = Vec::new();
        if let Some(path) = &self.config {
            let file = ConfigLayer::from_file(path)?;
            overrides.extend(file.keys());
            layer.overlay(&file);
        }
        let flags = self.flag_layer();
        overrides.extend(flags.keys());
        layer.overlay(&flags);
        overrides.sort();
        overrides.dedup();
        Ok(ResolvedRun {
            preset: self.preset.clone(),
            overrides,
            config: RunConfig::resolve(&layer)?,
        })
    }
}

/// What `simulate` writes to `config.json` next to the ensemble manifest.
#[derive(Clone, Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct ResolvedRun {
    pub preset: Option<String>,
    /// Keys set by the config file or flags on top of the preset.
    pub overrides: Vec<String>,
    pub config: RunConfig,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Directory searched recursively for `averages.csv`.
    #[arg(long)]
    pub input: PathBuf,
    /// Where `phase_diagram.csv` and `threshold.json` go; defaults to the input.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, default_value_t = 400)]
    pub bootstrap: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Subcommand)]
pub enum OracleCommand {
    /// `[<S>] = [<S>^2]` on the Nishimori line at L = 2.
    Nishimori {
        /// Defaults to both models.
        #[arg(long)]
        model: Option<ModelKind>,
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        displacement: usize,
        /// Multiplies the Nishimori beta; anything but 1 leaves the line.
        #[arg(long, default_value_t = 1.0)]
        beta_factor: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Class probability over partition function across all bit-flip patterns at L = 2.
    ClassRatio {
        #[arg(long, num_args = 1.., default_values_t = [0.05, 0.2])]
        p: Vec<f64>,
    },
    /// Exact thermal averages for one sampled disorder at L = 2.
    Exact {
        #[arg(long)]
        model: ModelKind,
        #[arg(long, default_value_t = 0.0)]
        p: f64,
        #[arg(long, num_args = 1.., required = true)]
        temps: Vec<f64>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Self-duality of the clean models at L = 2 and the entropy sum of two rates.
    Duality {
        #[arg(long, default_value_t = 0.3)]
        beta: f64,
        #[arg(long, default_value_t = 0.152)]
        px: f64,
        #[arg(long, default_value_t = 0.075)]
        pz: f64,
    },
}

const SPREAD_TOLERANCE: f64 = 1e-10;

fn print_json<T: Serialize>(value: &T) -> Result<(), CliError> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

/// Sets the global rayon pool size from `--workers` or `XCUBE_WORKERS`.
pub fn init_workers(workers: Option<usize>) -> Result<(), CliError> {
    let n = match workers {
        Some(n) => Some(n),
        None => match std::env::var("XCUBE_WORKERS") {
            Ok(s) => Some(
                s.parse::<usize>()
                    .ok()
                    .filter(|&n| n > 0)
                    .ok_or_else(|| CliError::Config(format!("`XCUBE_WORKERS`: expected a positive integer, got {s:?}")))?,
            ),
            Err(_) => None,
        },
    };
    if let Some(n) = n {
        // a pool built earlier in the process wins
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

pub fn simulate(args: &SimulateArgs, control: &RunControl) -> Result<(), CliError> {
    let run = args.resolve()?;
    let cfg = &run.config;
    init_workers(cfg.workers)?;
    let point = cfg.disorder_point()?;
    fs::create_dir_all(&cfg.out)?;
    let config_path = cfg.out.join("config.json");
    let dir = EnsembleDir::new(&cfg.out);
    log::info!(
        "{} L={} p={} with {} temperatures in [{}, {}], tau_max {}, {} realizations -> {}",
        cfg.model.as_str(),
        cfg.size,
        cfg.p,
        cfg.n_temps,
        cfg.t_min,
        cfg.t_max,
        cfg.tau_max,
        cfg.nd,
        cfg.out.display()
    );
    let summary = run_disorder_point(&point, Some(&dir), control);
    // written after the parameter check so a mismatched directory keeps its config
    if !matches!(&summary, Err(xcube_core::Error::Invalid(_))) {
        fs::write(&config_path, serde_json::to_vec_pretty(&run)?)?;
    }
    let summary = summary?;
    log::info!(
        "{} of {} realizations used; averages in {}",
        summary.n_used,
        cfg.nd,
        dir.averages().display()
    );
    Ok(())
}

pub fn analyze(args: &AnalyzeArgs) -> Result<(), CliError> {
    let output = args.output.clone().unwrap_or_else(|| args.input.clone());
    fs::create_dir_all(&output)?;
    let mut opts = AnalysisOptions::default();
    opts.crossing.n_bootstrap = args.bootstrap;
    opts.crossing.seed = args.seed;
    let report = analysis::analyze_directory(&args.input, &output, &opts)?;
    print_json(&report.thresholds)
}

#[derive(Serialize)]
struct Verdict<T: Serialize> {
    pass: bool,
    reports: Vec<T>,
}

pub fn oracle(cmd: &OracleCommand) -> Result<(), CliError> {
    match cmd {
        OracleCommand::Nishimori {
            model,
            p,
            samples,
            displacement,
            beta_factor,
            seed,
        } => {
            let models = match model {
                Some(m) => vec![*m],
                None => vec![ModelKind::Rpi, ModelKind::Racat],
            };
            let beta = oracle::nishimori_beta(*p)? * beta_factor;
            let reports = models
                .into_iter()
                .map(|m| oracle::nishimori_identity_check(m, *p, *samples, *displacement, Some(beta), *seed))
                .collect::<xcube_core::Result<Vec<_>>>()?;
            let pass = reports.iter().all(|r| r.holds);
            print_json(&Verdict { pass, reports })?;
            check(pass, "Nishimori identity violated")
        }
        OracleCommand::ClassRatio { p } => {
            let reports = oracle::class_ratio_exhaustive(&Lattice::new(2)?, p)?;
            let pass = reports.iter().all(|r| r.relative_spread < SPREAD_TOLERANCE);
            print_json(&Verdict { pass, reports })?;
            check(pass, "class ratio is not constant")
        }
        OracleCommand::Exact { model, p, temps, seed } => {
            if let Some(t) = temps.iter().find(|&&t| !(t > 0.0 && t.is_finite())) {
                return Err(CliError::Config(format!("`temps`: need positive temperatures, got {t}")));
            }
            let lat = Arc::new(Lattice::new(2)?);
            let disorder = Arc::new(Disorder::sample(&lat, *p, model.species(), *seed)?);
            let mask = oracle::disorder_mask(&disorder)?;
            let table = match model {
                ModelKind::Rpi => StateTable::build(&RpiModel::new(lat.clone(), disorder.clone())?)?,
                ModelKind::Racat => StateTable::build(&RacatModel::new(lat.clone(), disorder.clone())?)?,
            };
            let rows: Vec<_> = temps.iter().map(|&t| table.thermal(mask, 1.0 / t)).collect();
            print_json(&rows)
        }
        OracleCommand::Duality { beta, px, pz } => {
            #[derive(Serialize)]
            struct Report {
                beta: f64,
                dual_beta: f64,
                ln_z: f64,
                ln_z_dual_side: f64,
                entropy: analysis::EntropyCheck,
                pass: bool,
            }
            let (ln_z, ln_z_dual_side) = oracle::kramers_wannier_periodic(*beta)?;
            let pass = (ln_z - ln_z_dual_side).abs() <= 1e-9 * ln_z.abs().max(1.0);
            print_json(&Report {
                beta: *beta,
                dual_beta: oracle::dual_temperature(*beta)?,
                ln_z,
                ln_z_dual_side,
                entropy: analysis::shannon_duality_check(*px, *pz)?,
                pass,
            })?;
            check(pass, "duality sides disagree")
        }
    }
}

fn check(pass: bool, what: &str) -> Result<(), CliError> {
    if pass {
        Ok(())
    } else {
        Err(CliError::OracleFailed(what.into()))
    }
}

pub fn code_info_report(sizes: &[usize]) -> Result<(), CliError> {
    let infos = sizes
        .iter()
        .map(|&l| Lattice::new(l).map(|lat| code_info(&lat)))
        .collect::<xcube_core::Result<Vec<_>>>()?;
    print_json(&infos)
}

pub fn list_presets() {
    for p in presets::all() {
        println!(
            "{}\tN_T={}\tT=[{:.2}, {:.2}]\ttau_max={}\tN_d={}",
            p.name(),
            p.n_temps,
            p.t_min,
            p.t_max,
            p.tau_max,
            p.n_disorder
        );
    }
}

/// Runs a parsed command line; the caller maps errors to exit codes.
pub fn run(cli: &Cli, control: &RunControl) -> Result<(), CliError> {
    match &cli.command {
        Command::Simulate(args) => simulate(args, control),
        Command::Analyze(args) => {
            init_workers(None)?;
            analyze(args)
        }
        Command::Oracle(cmd) => {
            init_workers(None)?;
            oracle(cmd)
        }
        Command::CodeInfo { sizes } => code_info_report(sizes),
        Command::Presets => {
            list_presets();
            Ok(())
        }
    }
}

/// Reads the `config.json` a previous `simulate` left in `dir`.
pub fn read_resolved(dir: &Path) -> Result<ResolvedRun, CliError> {
    Ok(serde_json::from_slice(&fs::read(dir.join("config.json"))?)?)
}
