use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::error::CliError;
use crate::mlmc::{Allocation, MlmcConfig, RefinementMode};
use crate::problems::Problem;
use crate::solve::SolverConfig;

/// Environment variable overriding `out_dir`.
pub const OUT_DIR_ENV: &str = "MLMC_OUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchmarkKind {
    Poisson,
    Obstacle,
}

/// Experiment settings, read from a flat `key = value` file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub benchmark: BenchmarkKind,
    pub beta: f64,
    pub modes: Vec<RefinementMode>,
    pub tol_list: Vec<f64>,
    pub replicas: u32,
    pub seed: u64,
    /// `None` picks the benchmark default.
    pub m_min: Option<usize>,
    pub theta: Option<f64>,
    pub q: f64,
    pub sigma_alg: f64,
    pub c_est: f64,
    pub allocation: Allocation,
    pub out_dir: PathBuf,
    pub reference_resolution: usize,
    pub calibration_samples: usize,
    pub dof_samples: usize,
    /// Deepest level of the dof-scaling study; 0 picks the benchmark default.
    pub dof_levels: usize,
    pub level_cap: usize,
    pub max_refinements: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            benchmark: BenchmarkKind::Poisson,
            beta: 10.0,
            modes: vec![RefinementMode::Uniform, RefinementMode::Adaptive],
            tol_list: vec![0.4, 0.2, 0.1],
            replicas: 5,
            seed: 0,
            m_min: None,
            theta: None,
            q: 0.5,
            sigma_alg: 1e-3,
            c_est: 1.0,
            allocation: Allocation::Giles,
            out_dir: PathBuf::from("out"),
            reference_resolution: 64,
            calibration_samples: 1000,
            dof_samples: 100,
            dof_levels: 0,
            level_cap: 12,
            max_refinements: 80,
        }
    }
}

/// Keys accepted by [`ExperimentConfig::set`].
pub const KEYS: &[&str] = &[
    "benchmark",
    "beta",
    "mode",
    "tol_list",
    "replicas",
    "seed",
    "m_min",
    "theta",
    "q",
    "sigma_alg",
    "c_est",
    "allocation",
    "out_dir",
    "reference_resolution",
    "calibration_samples",
    "dof_samples",
    "dof_levels",
    "level_cap",
    "max_refinements",
];

fn num<T: FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value.parse().map_err(|_| CliError::Config(format!("{key}: cannot parse `{value}`")))
}

fn list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, CliError> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| num(key, s)).collect()
}

fn mode(key: &str, s: &str) -> Result<RefinementMode, CliError> {
    match s {
        "uniform" => Ok(RefinementMode::Uniform),
        "adaptive" => Ok(RefinementMode::Adaptive),
        _ => Err(CliError::Config(format!("{key}: unknown mode `{s}`"))),
    }
}

impl ExperimentConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let value = value.trim();
        match key {
            "benchmark" => {
                self.benchmark = match value {
                    "poisson" => BenchmarkKind::Poisson,
                    "obstacle" => BenchmarkKind::Obstacle,
                    _ => return Err(CliError::Config(format!("benchmark: unknown `{value}`"))),
                }
            }
            "beta" => self.beta = num(key, value)?,
            "mode" => self.modes = value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| mode(key, s)).collect::<Result<_, _>>()?,
            "tol_list" => self.tol_list = list(key, value)?,
            "replicas" => self.replicas = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "m_min" => self.m_min = Some(num(key, value)?),
            "theta" => self.theta = Some(num(key, value)?),
            "q" => self.q = num(key, value)?,
            "sigma_alg" => self.sigma_alg = num(key, value)?,
            "c_est" => self.c_est = num(key, value)?,
            "allocation" => {
                self.allocation = match value {
                    "giles" => Allocation::Giles,
                    "theoretical" => Allocation::Theoretical,
                    _ => return Err(CliError::Config(format!("allocation: unknown `{value}`"))),
                }
            }
            "out_dir" => self.out_dir = PathBuf::from(value),
            "reference_resolution" => self.reference_resolution = num(key, value)?,
            "calibration_samples" => self.calibration_samples = num(key, value)?,
            "dof_samples" => self.dof_samples = num(key, value)?,
            "dof_levels" => self.dof_levels = num(key, value)?,
            "level_cap" => self.level_cap = num(key, value)?,
            "max_refinements" => self.max_refinements = num(key, value)?,
            _ => return Err(CliError::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| CliError::Config(format!("line {}: expected key = value", n + 1)))?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut c = Self::default();
        c.apply_text(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.tol_list.is_empty() || self.tol_list.iter().any(|&t| !(t > 0.0)) {
            return bad("tol_list must hold positive values".into());
        }
        if self.tol_list.windows(2).any(|w| w[1] >= w[0]) {
            return bad("tol_list must be strictly descending".into());
        }
        if self.replicas < 1 {
            return bad("replicas must be at least 1".into());
        }
        if self.modes.is_empty() {
            return bad("mode list is empty".into());
        }
        if !(self.q > 0.0 && self.q < 1.0) {
            return bad(format!("q = {} outside (0, 1)", self.q));
        }
        if !(self.sigma_alg > 0.0) {
            return bad("sigma_alg must be positive".into());
        }
        if self.benchmark == BenchmarkKind::Poisson && !(self.beta > 0.0) {
            return bad("beta must be positive".into());
        }
        if self.reference_resolution < 16 {
            return bad("reference_resolution must be at least 16".into());
        }
        Ok(())
    }

    pub fn problem(&self) -> Result<Problem, CliError> {
        Ok(match self.benchmark {
            BenchmarkKind::Poisson => Problem::poisson(self.beta).map_err(crate::error::MlmcError::from)?,
            BenchmarkKind::Obstacle => Problem::obstacle(),
        })
    }

    pub fn solver(&self) -> SolverConfig {
        SolverConfig { sigma_alg: self.sigma_alg, ..SolverConfig::default() }
    }

    pub fn mlmc(&self, problem: &Problem, mode: RefinementMode, replica: u32) -> MlmcConfig {
        let mut c = MlmcConfig::for_problem(problem, mode);
        c.allocation = self.allocation;
        c.q = self.q;
        c.c_est = self.c_est;
        c.theta = self.theta.unwrap_or(c.theta);
        c.m_min = self.m_min.unwrap_or(c.m_min);
        c.solver = self.solver();
        c.max_refinements = self.max_refinements;
        c.level_cap = self.level_cap;
        c.seed = self.seed;
        c.replica = replica;
        c.calibration_samples = self.calibration_samples;
        c
    }

    pub fn dof_levels_or_default(&self) -> usize {
        match (self.dof_levels, self.benchmark) {
            (0, BenchmarkKind::Poisson) => 6,
            (0, BenchmarkKind::Obstacle) => 10,
            (l, _) => l,
        }
    }

    /// The configuration as `key = value` text, readable by [`ExperimentConfig::parse`].
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let join = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
        let _ = writeln!(s, "benchmark = {}", match self.benchmark {
            BenchmarkKind::Poisson => "poisson",
            BenchmarkKind::Obstacle => "obstacle",
        });
        let _ = writeln!(s, "beta = {}", self.beta);
        let _ = writeln!(s, "mode = {}", self.modes.iter().map(|m| m.name()).collect::<Vec<_>>().join(","));
        let _ = writeln!(s, "tol_list = {}", join(&self.tol_list));
        let _ = writeln!(s, "replicas = {}", self.replicas);
        let _ = writeln!(s, "seed = {}", self.seed);
        if let Some(m) = self.m_min {
            let _ = writeln!(s, "m_min = {m}");
        }
        if let Some(t) = self.theta {
            let _ = writeln!(s, "theta = {t}");
        }
        let _ = writeln!(s, "q = {}", self.q);
        let _ = writeln!(s, "sigma_alg = {}", self.sigma_alg);
        let _ = writeln!(s, "c_est = {}", self.c_est);
        let _ = writeln!(s, "allocation = {}", match self.allocation {
            Allocation::Giles => "giles",
            Allocation::Theoretical => "theoretical",
        });
        let _ = writeln!(s, "out_dir = {}", self.out_dir.display());
        let _ = writeln!(s, "reference_resolution = {}", self.reference_resolution);
        let _ = writeln!(s, "calibration_samples = {}", self.calibration_samples);
        let _ = writeln!(s, "dof_samples = {}", self.dof_samples);
        let _ = writeln!(s, "dof_levels = {}", self.dof_levels);
        let _ = writeln!(s, "level_cap = {}", self.level_cap);
        let _ = writeln!(s, "max_refinements = {}", self.max_refinements);
        s
    }
}
