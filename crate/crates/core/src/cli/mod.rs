//! Experiment runner: configuration, sweeps, CSV output and plots.

pub mod config;
pub mod experiment;
pub mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

pub use config::{BenchmarkKind, ExperimentConfig, OUT_DIR_ENV};
pub use experiment::{calibrate, dof_scaling, dof_scaling_study, fit_slope, run_experiment, CostRow, DofRow, ErrorRow, RunRecord, SampleRow};
pub use plot::plot_dir;

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "mlmc-fem", version, about = "Adaptive multilevel Monte Carlo finite element experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the level-1 estimator norm and write calibration.json
    Calibrate(Overrides),
    /// Run the error/cost sweep over all modes, tolerances and replicas
    Run(Overrides),
    /// Maximal unknowns per level over independent adaptive solves
    Dofscale(Overrides),
    /// Render SVG plots from the CSV files of an output directory
    Plot {
        /// Directory holding the CSV files; defaults to the configured out_dir
        dir: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
}

/// Config file plus per-key overrides.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// key = value configuration file
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Extra `key=value` assignment, applied after the file
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long)]
    pub benchmark: Option<String>,
    #[arg(long)]
    pub beta: Option<String>,
    /// Comma-separated list of uniform, adaptive
    #[arg(long)]
    pub mode: Option<String>,
    /// Comma-separated, descending
    #[arg(long)]
    pub tol_list: Option<String>,
    #[arg(long)]
    pub replicas: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub m_min: Option<String>,
    #[arg(long)]
    pub theta: Option<String>,
    #[arg(long)]
    pub q: Option<String>,
    #[arg(long)]
    pub sigma_alg: Option<String>,
    #[arg(long)]
    pub c_est: Option<String>,
    /// giles or theoretical
    #[arg(long)]
    pub allocation: Option<String>,
    #[arg(long)]
    pub out_dir: Option<String>,
    #[arg(long)]
    pub reference_resolution: Option<String>,
    #[arg(long)]
    pub calibration_samples: Option<String>,
    #[arg(long)]
    pub dof_samples: Option<String>,
    #[arg(long)]
    pub dof_levels: Option<String>,
    #[arg(long)]
    pub level_cap: Option<String>,
    #[arg(long)]
    pub max_refinements: Option<String>,
}

impl Overrides {
    fn flags(&self) -> Vec<(&'static str, &String)> {
        let all = [
            ("benchmark", &self.benchmark),
            ("beta", &self.beta),
            ("mode", &self.mode),
            ("tol_list", &self.tol_list),
            ("replicas", &self.replicas),
            ("seed", &self.seed),
            ("m_min", &self.m_min),
            ("theta", &self.theta),
            ("q", &self.q),
            ("sigma_alg", &self.sigma_alg),
            ("c_est", &self.c_est),
            ("allocation", &self.allocation),
            ("out_dir", &self.out_dir),
            ("reference_resolution", &self.reference_resolution),
            ("calibration_samples", &self.calibration_samples),
            ("dof_samples", &self.dof_samples),
            ("dof_levels", &self.dof_levels),
            ("level_cap", &self.level_cap),
            ("max_refinements", &self.max_refinements),
        ];
        all.into_iter().filter_map(|(k, v)| v.as_ref().map(|v| (k, v))).collect()
    }

    /// Defaults, then the file, then `MLMC_OUT_DIR`, then `--set`, then named flags.
    pub fn resolve(&self, env_out_dir: Option<String>) -> Result<ExperimentConfig, CliError> {
        let mut cfg = ExperimentConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_text(&std::fs::read_to_string(path)?)?;
        }
        if let Some(dir) = env_out_dir.filter(|d| !d.is_empty()) {
            cfg.set("out_dir", &dir)?;
        }
        for kv in &self.set {
            let (k, v) = kv.split_once('=').ok_or_else(|| CliError::Config(format!("--set `{kv}`: expected key=value")))?;
            cfg.set(k.trim(), v)?;
        }
        for (k, v) in self.flags() {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Outcome of a verb: whether every run met its tolerance.
fn execute(command: &Command, env_out_dir: Option<String>) -> Result<bool, CliError> {
    match command {
        Command::Calibrate(o) => {
            let cfg = o.resolve(env_out_dir)?;
            let cal = calibrate(&cfg)?;
            println!("eta1 = {:.6e} over {} samples (std error^2 {:.3e})", cal.eta1_norm, cal.etas.len(), cal.std_error_sq);
            Ok(true)
        }
        Command::Run(o) => {
            let cfg = o.resolve(env_out_dir)?;
            let record = run_experiment(&cfg)?;
            for r in &record.errors {
                let flag = if r.error <= r.tol { "ok" } else { "MISSED" };
                println!("{:<8} Tol={:<6} replica {} error {:.4e} cost {} L={} {flag}", r.mode, r.tol, r.replica, r.error, r.cost, r.levels);
            }
            for c in &record.costs {
                println!("{:<8} Tol={:<6} mean cost {:.4e} rms error {:.4e} slope {:.3}", c.mode, c.tol, c.mean_cost, c.rms_error, c.fitted_slope);
            }
            Ok(record.all_met())
        }
        Command::Dofscale(o) => {
            let cfg = o.resolve(env_out_dir)?;
            let rows = dof_scaling_study(&cfg)?;
            for r in &rows {
                println!("level {:>2} max N {:>8} mean N {:>10.1}", r.level, r.max_n, r.mean_n);
            }
            if let Some(r) = rows.first() {
                println!("fitted slope {:.4}", r.fitted_slope);
            }
            Ok(true)
        }
        Command::Plot { dir, overrides } => {
            let dir = match dir {
                Some(d) => d.clone(),
                None => overrides.resolve(env_out_dir)?.out_dir,
            };
            let written = plot_dir(&dir)?;
            if written.is_empty() {
                println!("no data to plot in {}", dir.display());
            }
            for p in written {
                println!("wrote {}", p.display());
            }
            Ok(true)
        }
    }
}

/// Entry point of the binary; exit code 0 if every run met its tolerance, 1 if some did not, 2 on error.
pub fn run_cli<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match execute(&cli.command, std::env::var(OUT_DIR_ENV).ok()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
