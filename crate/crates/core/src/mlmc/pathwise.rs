use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::ToleranceSchedule;
use crate::error::MlmcError;
use crate::estimate::{estimate_hierarchical, mark_doerfler, MarkingConfig};
use crate::fem::{assemble, prolong, FeFunction};
use crate::mesh::{refine_marked, refine_uniform, Mesh};
use crate::problems::{Problem, ProblemSample, SeedPath};
use crate::solve::{solve_obstacle, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RefinementMode {
    Uniform,
    Adaptive,
}

impl RefinementMode {
    pub fn name(self) -> &'static str {
        match self {
            RefinementMode::Uniform => "uniform",
            RefinementMode::Adaptive => "adaptive",
        }
    }
}

/// Settings shared by every pathwise solve of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathwiseConfig {
    pub mode: RefinementMode,
    pub theta: f64,
    pub solver: SolverConfig,
    pub max_refinements: usize,
}

/// Solution reached by one trajectory at one level.
#[derive(Debug, Clone)]
pub struct LevelSolution {
    pub level: usize,
    pub solution: FeFunction,
    /// Refinement steps taken from the initial mesh.
    pub steps: usize,
    /// Estimator value on the final mesh; `None` in uniform mode.
    pub eta: Option<f64>,
}

impl LevelSolution {
    pub fn mesh(&self) -> &Arc<Mesh> {
        self.solution.mesh()
    }

    pub fn unknowns(&self) -> usize {
        self.solution.mesh().num_vertices()
    }
}

/// Fine and coarse member of a level pair, both from the same refinement trajectory.
#[derive(Debug, Clone)]
pub struct PathwiseResult {
    pub level: usize,
    pub sample: u64,
    pub fine: LevelSolution,
    pub coarse: Option<LevelSolution>,
}

impl PathwiseResult {
    /// Cost `N_{l,i}`: the unknowns of the fine solution.
    pub fn cost(&self) -> usize {
        self.fine.unknowns()
    }

    pub fn coarse_cost(&self) -> Option<usize> {
        self.coarse.as_ref().map(LevelSolution::unknowns)
    }

    /// `ũ_l − ũ_{l−1}` on the fine mesh (`ũ_1` on level 1).
    pub fn difference(&self) -> Result<FeFunction, MlmcError> {
        match &self.coarse {
            None => Ok(self.fine.solution.clone()),
            Some(c) => {
                let pc = prolong(&c.solution, self.fine.mesh())?;
                Ok(self.fine.solution.add_scaled(&pc, -1.0)?)
            }
        }
    }
}

/// Uniform refinements of the initial mesh, built once per run.
#[derive(Debug, Default)]
pub struct UniformMeshes {
    meshes: Mutex<Vec<Arc<Mesh>>>,
}

impl UniformMeshes {
    /// The initial mesh refined `steps` times.
    pub fn get(&self, initial: &Arc<Mesh>, steps: usize) -> Result<Arc<Mesh>, MlmcError> {
        let mut cache = self.meshes.lock().expect("mesh cache poisoned");
        if cache.is_empty() {
            cache.push(initial.clone());
        }
        while cache.len() <= steps {
            let next = Arc::new(refine_uniform(cache.last().expect("nonempty"), 1)?);
            cache.push(next);
        }
        Ok(cache[steps].clone())
    }
}

/// Uniform refinement steps per level: smallest `r` with `2^{−r} ≤ q`.
pub fn uniform_steps_per_level(q: f64) -> usize {
    let mut r = 1;
    while 0.5f64.powi(r as i32) > q * (1.0 + 1e-12) {
        r += 1;
    }
    r
}

/// Follows one refinement trajectory and returns its solutions at levels `1..=level`.
///
/// Each level is solved to its own tolerance on the mesh where that level's
/// stopping criterion first holds; the next level continues from there, so the
/// solutions are nested and the first `l` entries do not depend on `level`.
pub fn pathwise_trajectory(
    problem: &Problem,
    sample: &ProblemSample,
    seed: &SeedPath,
    level: usize,
    schedule: &ToleranceSchedule,
    cfg: &PathwiseConfig,
    uniform: &UniformMeshes,
) -> Result<Vec<LevelSolution>, MlmcError> {
    let r = uniform_steps_per_level(schedule.q);
    let mut mesh = problem.initial_mesh().clone();
    let mut u = FeFunction::zeros(mesh.clone());
    let mut steps = 0;
    let mut j = 1;
    let mut out = Vec::with_capacity(level);
    let marking = MarkingConfig { theta: cfg.theta };
    loop {
        let system = assemble(sample, &mesh)?;
        let solved = solve_obstacle(&system, &u, schedule.solver_tol(j), &cfg.solver)?;
        if !solved.converged {
            return Err(MlmcError::SolverDiverged {
                level: j,
                sample: seed.sample,
                step: steps,
                iterations: solved.iterations,
                increment: solved.last_increment,
            });
        }
        u = solved.solution;
        let (done, report) = match cfg.mode {
            RefinementMode::Uniform => (steps >= (j - 1) * r, None),
            RefinementMode::Adaptive => {
                let report = estimate_hierarchical(sample, &mesh, &u)?;
                (j == 1 || report.eta <= schedule.eta_target(j), Some(report))
            }
        };
        if done {
            out.push(LevelSolution { level: j, solution: u.clone(), steps, eta: report.as_ref().map(|r| r.eta) });
            if j == level {
                return Ok(out);
            }
            j += 1;
            continue;
        }
        if steps >= cfg.max_refinements {
            return Err(MlmcError::RefinementLimit {
                level: j,
                sample: seed.sample,
                limit: cfg.max_refinements,
                eta: report.map_or(f64::NAN, |r| r.eta),
                target: schedule.eta_target(j),
            });
        }
        mesh = match report {
            None => uniform.get(problem.initial_mesh(), steps + 1)?,
            Some(report) => {
                let marked = mark_doerfler(&report, &marking);
                Arc::new(refine_marked(&mesh, &marked)?)
            }
        };
        u = prolong(&u, &mesh)?;
        steps += 1;
    }
}

/// Level pair `(ũ_l, ũ_{l−1})` for the sample drawn from `seed`.
pub fn pathwise_solve(
    problem: &Problem,
    seed: &SeedPath,
    level: usize,
    schedule: &ToleranceSchedule,
    cfg: &PathwiseConfig,
    uniform: &UniformMeshes,
) -> Result<PathwiseResult, MlmcError> {
    if level == 0 {
        return Err(MlmcError::Invalid("levels start at 1".into()));
    }
    let sample = problem.sample(seed);
    let mut path = pathwise_trajectory(problem, &sample, seed, level, schedule, cfg, uniform)?;
    let fine = path.pop().expect("trajectory reaches the requested level");
    Ok(PathwiseResult { level, sample: seed.sample, fine, coarse: path.pop() })
}
