//! Multilevel Monte Carlo: tolerance schedules, coupled pathwise solves,
//! level statistics, sample allocation and the outer driver.

mod allocation;
mod pathwise;
mod stats;

use std::f64::consts::SQRT_2;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use allocation::{allocate_giles, allocate_theoretical, ceil_count, theoretical_bounds};
pub use pathwise::{
    pathwise_solve, pathwise_trajectory, uniform_steps_per_level, LevelSolution, PathwiseConfig, PathwiseResult, RefinementMode,
    UniformMeshes,
};
pub use stats::{h_distance, h_norm, mc_mean, variance_estimate, LevelStats, LevelSummary};

use crate::error::MlmcError;
use crate::estimate::estimate_hierarchical;
use crate::fem::{assemble, prolong, FeFunction};
use crate::mesh::union_all;
use crate::problems::{Problem, SeedPath, Stream};
use crate::solve::{solve_obstacle, SolverConfig};

/// `Tol_l = q^{l−1} Tol1` with `Tol1 = 2√2 C_est ‖η^{(1)}‖`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToleranceSchedule {
    pub tol1: f64,
    pub q: f64,
    pub levels: usize,
    pub eta1_norm: f64,
    pub c_est: f64,
}

impl ToleranceSchedule {
    pub fn new(eta1_norm: f64, c_est: f64, q: f64) -> Self {
        Self { tol1: 2.0 * SQRT_2 * c_est * eta1_norm, q, levels: 1, eta1_norm, c_est }
    }

    pub fn with_levels(mut self, levels: usize) -> Self {
        self.levels = levels.max(1);
        self
    }

    /// Reported tolerance `Tol_l`.
    pub fn tol(&self, l: usize) -> f64 {
        self.tol1 * self.q.powi(l as i32 - 1)
    }

    /// Tolerance in estimator units, used by the algebraic stopping rule.
    pub fn solver_tol(&self, l: usize) -> f64 {
        2.0 * SQRT_2 * self.eta_target(l)
    }

    /// Adaptive stopping threshold `q^{l−1} ‖η^{(1)}‖`.
    pub fn eta_target(&self, l: usize) -> f64 {
        self.eta1_norm * self.q.powi(l as i32 - 1)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Calibration {
    pub eta1_norm: f64,
    /// `η^{(1)}(ω_i)` per sample.
    pub etas: Vec<f64>,
    /// Standard error of the mean of `η²`.
    pub std_error_sq: f64,
}

impl Calibration {
    pub fn schedule(&self, c_est: f64, q: f64) -> ToleranceSchedule {
        ToleranceSchedule::new(self.eta1_norm, c_est, q)
    }
}

/// `η^{(1)}` of one sample on the initial mesh, solved to its own level-1 tolerance.
pub fn initial_estimate(problem: &Problem, seed: &SeedPath, solver: &SolverConfig) -> Result<f64, MlmcError> {
    let sample = problem.sample(seed);
    let mesh = problem.initial_mesh();
    let system = assemble(&sample, mesh)?;
    let mut u = FeFunction::zeros(mesh.clone());
    let mut tol = f64::INFINITY;
    let mut eta = f64::INFINITY;
    for _ in 0..8 {
        let solved = solve_obstacle(&system, &u, tol, solver)?;
        u = solved.solution;
        eta = estimate_hierarchical(&sample, mesh, &u)?.eta;
        let next = 2.0 * SQRT_2 * eta;
        if next >= tol {
            break;
        }
        tol = next;
    }
    Ok(eta)
}

/// Monte Carlo approximation of `‖η^{(1)}‖_{L²(Ω)}` from `n` samples.
pub fn calibrate_tol1(problem: &Problem, seed: u64, n: usize, solver: &SolverConfig) -> Result<Calibration, MlmcError> {
    if n == 0 {
        return Err(MlmcError::Invalid("calibration needs at least one sample".into()));
    }
    let etas = (0..n as u64)
        .into_par_iter()
        .map(|i| initial_estimate(problem, &SeedPath::new(seed, 1, i, 0, Stream::Calibration), solver))
        .collect::<Result<Vec<f64>, _>>()?;
    let m = n as f64;
    let mean_sq = etas.iter().map(|e| e * e).sum::<f64>() / m;
    let var_sq = if n > 1 { etas.iter().map(|e| (e * e - mean_sq).powi(2)).sum::<f64>() / (m - 1.0) } else { 0.0 };
    Ok(Calibration { eta1_norm: mean_sq.sqrt(), etas, std_error_sq: (var_sq / m).sqrt() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Allocation {
    Giles,
    Theoretical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlmcConfig {
    pub mode: RefinementMode,
    pub allocation: Allocation,
    pub q: f64,
    pub c_est: f64,
    pub theta: f64,
    pub m_min: usize,
    pub solver: SolverConfig,
    pub max_refinements: usize,
    pub level_cap: usize,
    pub seed: u64,
    pub replica: u32,
    pub calibration_samples: usize,
    /// Work exponent for the theoretical allocation; defaults to the space dimension.
    pub work_exponent: Option<f64>,
}

impl MlmcConfig {
    pub fn for_problem(problem: &Problem, mode: RefinementMode) -> Self {
        Self {
            mode,
            allocation: Allocation::Giles,
            q: 0.5,
            c_est: 1.0,
            theta: problem.default_theta(),
            m_min: problem.default_m_min(),
            solver: SolverConfig::default(),
            max_refinements: 80,
            level_cap: 12,
            seed: 0,
            replica: 0,
            calibration_samples: 1000,
            work_exponent: None,
        }
    }

    pub fn pathwise(&self) -> PathwiseConfig {
        PathwiseConfig { mode: self.mode, theta: self.theta, solver: self.solver, max_refinements: self.max_refinements }
    }

    fn validate(&self, tol: f64) -> Result<(), MlmcError> {
        let bad = |m: &str| Err(MlmcError::Invalid(m.into()));
        if !(tol > 0.0) {
            return bad("tolerance must be positive");
        }
        if !(self.q > 0.0 && self.q < 1.0) {
            return bad("q must lie in (0, 1)");
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return bad("theta must lie in (0, 1]");
        }
        if !(self.c_est > 0.0) {
            return bad("c_est must be positive");
        }
        if self.m_min < 2 {
            return bad("m_min must be at least 2");
        }
        if self.level_cap < 2 {
            return bad("level cap must be at least 2");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Remaining bias and statistical error both within budget.
    Converged,
    /// Fixed level count and sample sizes from the cost theorem.
    TheoreticalAllocation,
}

#[derive(Debug, Clone)]
pub struct MlmcReport {
    pub estimate: FeFunction,
    pub levels: Vec<LevelStats>,
    pub schedule: ToleranceSchedule,
    pub tol: f64,
    pub total_cost: u64,
    pub bias_estimate: f64,
    pub termination: Termination,
    pub config: MlmcConfig,
}

#[derive(Debug, Serialize)]
pub struct ReportJson<'a> {
    pub tol: f64,
    pub mode: RefinementMode,
    pub allocation: Allocation,
    pub seed: u64,
    pub replica: u32,
    pub schedule: ToleranceSchedule,
    pub levels: Vec<LevelSummary>,
    pub total_cost: u64,
    pub bias_estimate: f64,
    pub bias_rate: f64,
    pub termination: Termination,
    pub estimate_vertices: usize,
    pub sample_costs: Vec<&'a [usize]>,
}

impl MlmcReport {
    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn json(&self) -> ReportJson<'_> {
        ReportJson {
            tol: self.tol,
            mode: self.config.mode,
            allocation: self.config.allocation,
            seed: self.config.seed,
            replica: self.config.replica,
            schedule: self.schedule,
            levels: self.levels.iter().map(LevelStats::summary).collect(),
            total_cost: self.total_cost,
            bias_estimate: self.bias_estimate,
            bias_rate: self.schedule.q,
            termination: self.termination,
            estimate_vertices: self.estimate.mesh().num_vertices(),
            sample_costs: self.levels.iter().map(|s| s.costs.as_slice()).collect(),
        }
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<(), serde_json::Error> {
        serde_json::to_writer_pretty(w, &self.json())
    }
}

/// Shared state of one MLMC run.
struct Driver<'a> {
    problem: &'a Problem,
    cfg: &'a MlmcConfig,
    schedule: ToleranceSchedule,
    uniform: UniformMeshes,
}

const BATCH: usize = 256;

impl Driver<'_> {
    fn extend(&self, stats: &mut LevelStats, target: usize) -> Result<(), MlmcError> {
        let pw = self.cfg.pathwise();
        while stats.samples() < target {
            let start = stats.samples() as u64;
            let end = (target as u64).min(start + BATCH as u64);
            let batch = (start..end)
                .into_par_iter()
                .map(|i| {
                    let seed = SeedPath::new(self.cfg.seed, stats.level as u32, i, self.cfg.replica, Stream::Production);
                    pathwise_solve(self.problem, &seed, stats.level, &self.schedule, &pw, &self.uniform)
                })
                .collect::<Result<Vec<_>, _>>()?;
            stats.add_batch(&batch)?;
        }
        Ok(())
    }

    fn bias(&self, stats: &[LevelStats]) -> f64 {
        let last = stats.last().and_then(LevelStats::mean);
        last.map_or(f64::INFINITY, |m| h_norm(&m)) / (1.0 / self.schedule.q - 1.0)
    }

    fn report(&self, tol: f64, levels: Vec<LevelStats>, termination: Termination) -> Result<MlmcReport, MlmcError> {
        let bias_estimate = if levels.len() > 1 { self.bias(&levels) } else { f64::NAN };
        let means: Vec<FeFunction> = levels.iter().filter_map(LevelStats::mean).collect();
        let mesh = union_all(means.iter().map(|m| m.mesh().as_ref()))?.ok_or_else(|| MlmcError::Invalid("no samples".into()))?;
        let mesh = std::sync::Arc::new(mesh);
        let mut acc = vec![0.0; mesh.num_vertices()];
        for m in &means {
            for (a, v) in acc.iter_mut().zip(prolong(m, &mesh)?.values()) {
                *a += v;
            }
        }
        Ok(MlmcReport {
            estimate: FeFunction::new(mesh, acc)?,
            total_cost: levels.iter().map(LevelStats::cost_sum).sum(),
            schedule: self.schedule.with_levels(levels.len()),
            levels,
            tol,
            bias_estimate,
            termination,
            config: *self.cfg,
        })
    }

    fn giles(&self, tol: f64) -> Result<MlmcReport, MlmcError> {
        let cfg = self.cfg;
        let mut stats: Vec<LevelStats> = (1..=2).map(LevelStats::new).collect();
        let mut targets = vec![cfg.m_min; 2];
        loop {
            for (s, &t) in stats.iter_mut().zip(&targets) {
                self.extend(s, t)?;
            }
            let vc: Vec<(f64, f64)> = stats.iter().map(|s| (s.variance(), s.avg_cost())).collect();
            let alloc = allocate_giles(&vc, tol, 0);
            let mut grow = false;
            for ((s, t), &a) in stats.iter_mut().zip(targets.iter_mut()).zip(&alloc) {
                s.allocated = a;
                if a > s.samples() {
                    *t = a;
                    grow = true;
                }
            }
            if grow {
                continue;
            }
            let bias = self.bias(&stats);
            log::debug!("L={} bias {bias:e} samples {:?}", stats.len(), stats.iter().map(LevelStats::samples).collect::<Vec<_>>());
            if bias <= tol / SQRT_2 {
                return self.report(tol, stats, Termination::Converged);
            }
            if stats.len() >= cfg.level_cap {
                for s in &stats {
                    log::warn!("level cap: {:?}", s.summary());
                }
                return Err(MlmcError::LevelCap { cap: cfg.level_cap, bias });
            }
            stats.push(LevelStats::new(stats.len() + 1));
            targets.push(cfg.m_min);
        }
    }

    fn theoretical(&self, tol: f64) -> Result<MlmcReport, MlmcError> {
        let cfg = self.cfg;
        let mut levels = 1;
        while self.schedule.tol(levels) > tol * (1.0 + 1e-12) {
            if levels >= cfg.level_cap {
                return Err(MlmcError::LevelCap { cap: cfg.level_cap, bias: f64::NAN });
            }
            levels += 1;
        }
        let mut stats: Vec<LevelStats> = (1..=levels).map(LevelStats::new).collect();
        self.extend(&mut stats[0], cfg.m_min)?;
        let vu = stats[0].variance();
        let s = cfg.work_exponent.unwrap_or(self.problem.dim() as f64);
        let alloc = allocate_theoretical(&self.schedule.with_levels(levels), s, vu);
        for (st, &a) in stats.iter_mut().zip(&alloc) {
            st.allocated = a;
            self.extend(st, a.max(1))?;
        }
        self.report(tol, stats, Termination::TheoreticalAllocation)
    }
}

/// Runs the MLMC driver for tolerance `tol`. Without `calibration` the
/// initial tolerance is calibrated first.
pub fn run_mlmc(problem: &Problem, tol: f64, cfg: &MlmcConfig, calibration: Option<&Calibration>) -> Result<MlmcReport, MlmcError> {
    cfg.validate(tol)?;
    let owned;
    let cal = match calibration {
        Some(c) => c,
        None => {
            owned = calibrate_tol1(problem, cfg.seed, cfg.calibration_samples, &cfg.solver)?;
            &owned
        }
    };
    let driver = Driver { problem, cfg, schedule: cal.schedule(cfg.c_est, cfg.q), uniform: UniformMeshes::default() };
    match cfg.allocation {
        Allocation::Giles => driver.giles(tol),
        Allocation::Theoretical => driver.theoretical(tol),
    }
}
