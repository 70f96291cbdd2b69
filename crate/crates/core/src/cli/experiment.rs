use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::error::{CliError, MlmcError};
use crate::mlmc::{calibrate_tol1, pathwise_trajectory, run_mlmc, Calibration, RefinementMode, UniformMeshes};
use crate::problems::{SeedPath, Stream};

/// One row of `errors.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub mode: String,
    #[serde(rename = "Tol")]
    pub tol: f64,
    pub replica: u32,
    pub error: f64,
    pub cost: u64,
    pub levels: usize,
}

/// One row of `samples.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub mode: String,
    #[serde(rename = "Tol")]
    pub tol: f64,
    pub level: usize,
    /// Samples actually used, averaged over the replicas reaching the level.
    #[serde(rename = "avg_M")]
    pub avg_m: f64,
    /// Raw allocator request, averaged likewise.
    pub avg_allocated: f64,
    /// Unknowns per sample on the level.
    #[serde(rename = "avg_N")]
    pub avg_n: f64,
    pub replicas: u32,
}

/// One row of `costs.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostRow {
    pub mode: String,
    #[serde(rename = "Tol")]
    pub tol: f64,
    pub mean_cost: f64,
    pub rms_error: f64,
    pub fitted_slope: f64,
}

/// One row of `dofscaling.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DofRow {
    pub level: usize,
    #[serde(rename = "max_N")]
    pub max_n: usize,
    #[serde(rename = "mean_N")]
    pub mean_n: f64,
    pub fitted_slope: f64,
}

#[derive(Debug, Serialize)]
pub struct RunRecord {
    pub config: ExperimentConfig,
    pub calibration_eta1: f64,
    pub errors: Vec<ErrorRow>,
    pub samples: Vec<SampleRow>,
    pub costs: Vec<CostRow>,
    pub started: u64,
    pub finished: u64,
}

impl RunRecord {
    /// Every replica met its tolerance.
    pub fn all_met(&self) -> bool {
        self.errors.iter().all(|r| r.error <= r.tol)
    }
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    if x.len() < 2 {
        return f64::NAN;
    }
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn out_dir(cfg: &ExperimentConfig) -> Result<PathBuf, CliError> {
    fs::create_dir_all(&cfg.out_dir)?;
    Ok(cfg.out_dir.clone())
}

/// Calibrates `‖η^{(1)}‖` and writes `calibration.json`.
pub fn calibrate(cfg: &ExperimentConfig) -> Result<Calibration, CliError> {
    let problem = cfg.problem()?;
    let cal = calibrate_tol1(&problem, cfg.seed, cfg.calibration_samples, &cfg.solver())?;
    let dir = out_dir(cfg)?;
    serde_json::to_writer_pretty(BufWriter::new(File::create(dir.join("calibration.json"))?), &cal)?;
    Ok(cal)
}

fn load_calibration(cfg: &ExperimentConfig) -> Result<Calibration, CliError> {
    let path = cfg.out_dir.join("calibration.json");
    if let Ok(text) = fs::read_to_string(&path) {
        let cal: Calibration = serde_json::from_str(&text)?;
        if cal.etas.len() == cfg.calibration_samples {
            return Ok(cal);
        }
    }
    calibrate(cfg)
}

fn sample_rows(mode: RefinementMode, tol: f64, reports: &[crate::mlmc::MlmcReport]) -> Vec<SampleRow> {
    let depth = reports.iter().map(|r| r.num_levels()).max().unwrap_or(0);
    (1..=depth)
        .map(|l| {
            let stats: Vec<_> = reports.iter().filter_map(|r| r.levels.get(l - 1)).collect();
            let k = stats.len() as f64;
            let m: usize = stats.iter().map(|s| s.samples()).sum();
            let n: u64 = stats.iter().map(|s| s.cost_sum()).sum();
            SampleRow {
                mode: mode.name().into(),
                tol,
                level: l,
                avg_m: m as f64 / k,
                avg_allocated: stats.iter().map(|s| s.allocated as f64).sum::<f64>() / k,
                avg_n: n as f64 / m as f64,
                replicas: stats.len() as u32,
            }
        })
        .collect()
}

/// Runs every (mode, Tol, replica) combination and writes the CSV and JSON outputs.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunRecord, CliError> {
    cfg.validate()?;
    let started = now();
    let problem = cfg.problem()?;
    let dir = out_dir(cfg)?;
    fs::write(dir.join("config.txt"), cfg.to_text())?;
    let cal = load_calibration(cfg)?;
    let reference = problem.reference(cfg.reference_resolution).map_err(MlmcError::from)?;
    let reports_dir = dir.join("reports");
    fs::create_dir_all(&reports_dir)?;

    let mut errors = csv::Writer::from_path(dir.join("errors.csv"))?;
    let (mut error_rows, mut samples, mut costs) = (Vec::new(), Vec::new(), Vec::new());
    for &mode in &cfg.modes {
        let mut mode_costs = Vec::new();
        for (ti, &tol) in cfg.tol_list.iter().enumerate() {
            let mut reports = Vec::new();
            for replica in 0..cfg.replicas {
                let mc = cfg.mlmc(&problem, mode, replica);
                let report = match run_mlmc(&problem, tol, &mc, Some(&cal)) {
                    Ok(r) => r,
                    Err(e) => {
                        errors.flush()?;
                        log::error!("{} Tol={tol} replica {replica}: {e}", mode.name());
                        return Err(e.into());
                    }
                };
                let error = reference.h1_distance(&report.estimate, true);
                let row = ErrorRow { mode: mode.name().into(), tol, replica, error, cost: report.total_cost, levels: report.num_levels() };
                log::info!("{} Tol={tol} replica {replica}: error {error:.4e} cost {} L={}", mode.name(), row.cost, row.levels);
                errors.serialize(&row)?;
                errors.flush()?;
                let stem = format!("{}_tol{}_r{}", mode.name(), ti, replica);
                report.write_json(BufWriter::new(File::create(reports_dir.join(format!("{stem}.json")))?))?;
                report.estimate.mesh().write_dump(BufWriter::new(File::create(reports_dir.join(format!("{stem}.mesh")))?))?;
                error_rows.push(row);
                reports.push(report);
            }
            samples.extend(sample_rows(mode, tol, &reports));
            let k = reports.len() as f64;
            let mean_cost = reports.iter().map(|r| r.total_cost as f64).sum::<f64>() / k;
            let rms = (error_rows.iter().rev().take(reports.len()).map(|r| r.error * r.error).sum::<f64>() / k).sqrt();
            mode_costs.push((tol, mean_cost, rms));
        }
        let x: Vec<f64> = mode_costs.iter().map(|c| (1.0 / c.0).ln()).collect();
        let y: Vec<f64> = mode_costs.iter().map(|c| c.1.ln()).collect();
        let slope = fit_slope(&x, &y);
        costs.extend(mode_costs.into_iter().map(|(tol, mean_cost, rms_error)| CostRow {
            mode: mode.name().into(),
            tol,
            mean_cost,
            rms_error,
            fitted_slope: slope,
        }));
    }
    write_csv(&dir.join("samples.csv"), &samples)?;
    write_csv(&dir.join("costs.csv"), &costs)?;
    let record = RunRecord { config: cfg.clone(), calibration_eta1: cal.eta1_norm, errors: error_rows, samples, costs, started, finished: now() };
    serde_json::to_writer_pretty(BufWriter::new(File::create(dir.join("record.json"))?), &record)?;
    Ok(record)
}

/// Unknowns needed by `samples` independent trajectories at levels `1..=levels`,
/// with the slope of `ln max N` fitted over the last five levels.
pub fn dof_scaling(cfg: &ExperimentConfig, mode: RefinementMode, cal: &Calibration, samples: usize, levels: usize) -> Result<Vec<DofRow>, CliError> {
    let problem = cfg.problem()?;
    let mc = cfg.mlmc(&problem, mode, 0);
    let schedule = cal.schedule(cfg.c_est, cfg.q);
    let uniform = UniformMeshes::default();
    let counts = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let seed = SeedPath::new(cfg.seed, levels as u32, i, 0, Stream::DofScaling);
            let sample = problem.sample(&seed);
            let path = pathwise_trajectory(&problem, &sample, &seed, levels, &schedule, &mc.pathwise(), &uniform)?;
            Ok(path.iter().map(|s| s.unknowns()).collect::<Vec<usize>>())
        })
        .collect::<Result<Vec<_>, MlmcError>>()?;
    let max_n: Vec<usize> = (0..levels).map(|l| counts.iter().map(|c| c[l]).max().unwrap_or(0)).collect();
    let from = levels.saturating_sub(5);
    let x: Vec<f64> = (from + 1..=levels).map(|l| l as f64).collect();
    let y: Vec<f64> = max_n[from..].iter().map(|&n| (n as f64).ln()).collect();
    let slope = fit_slope(&x, &y);
    Ok((0..levels)
        .map(|l| DofRow {
            level: l + 1,
            max_n: max_n[l],
            mean_n: counts.iter().map(|c| c[l] as f64).sum::<f64>() / samples.max(1) as f64,
            fitted_slope: slope,
        })
        .collect())
}

/// Adaptive dof-scaling study; writes `dofscaling.csv`.
pub fn dof_scaling_study(cfg: &ExperimentConfig) -> Result<Vec<DofRow>, CliError> {
    cfg.validate()?;
    let cal = load_calibration(cfg)?;
    let rows = dof_scaling(cfg, RefinementMode::Adaptive, &cal, cfg.dof_samples, cfg.dof_levels_or_default())?;
    write_csv(&out_dir(cfg)?.join("dofscaling.csv"), &rows)?;
    Ok(rows)
}
