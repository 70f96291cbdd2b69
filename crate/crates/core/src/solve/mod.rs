//! Iterative solvers for the discrete pathwise problems.
//!
//! The obstacle solver alternates a projected Gauss–Seidel sweep with a linear
//! multigrid correction truncated at active nodes, followed by projection and
//! an exact line search. Without an obstacle it is plain multigrid.

mod multigrid;

use serde::{Deserialize, Serialize};

pub use multigrid::{Hierarchy, Multigrid};

use crate::error::FemError;
use crate::fem::{CsrMatrix, DiscreteSystem, FeFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMode {
    Pgs,
    PgsMultigrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub sigma_alg: f64,
    /// `None` means ten sweeps per unknown.
    pub max_iterations: Option<usize>,
    pub smoothing_steps: usize,
    pub mode: SolverMode,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { sigma_alg: 1e-3, max_iterations: None, smoothing_steps: 1, mode: SolverMode::PgsMultigrid }
    }
}

impl SolverConfig {
    /// Increment threshold `σ_alg Tol / (2√2)`.
    pub fn threshold(&self, level_tol: f64) -> f64 {
        self.sigma_alg * level_tol / (2.0 * std::f64::consts::SQRT_2)
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub solution: FeFunction,
    pub iterations: usize,
    pub last_increment: f64,
    pub converged: bool,
}

/// Solves `min ½uᵀAu − bᵀu` subject to the Dirichlet data and, if present, `u ≥ lower`.
pub fn solve_obstacle(system: &DiscreteSystem, initial: &FeFunction, level_tol: f64, cfg: &SolverConfig) -> Result<SolveResult, FemError> {
    run(system, initial, level_tol, cfg, system.lower.as_deref())
}

/// Unconstrained solve; any lower bound in `system` is ignored.
pub fn solve_linear(system: &DiscreteSystem, initial: &FeFunction, level_tol: f64, cfg: &SolverConfig) -> Result<SolveResult, FemError> {
    run(system, initial, level_tol, cfg, None)
}

fn run(system: &DiscreteSystem, initial: &FeFunction, level_tol: f64, cfg: &SolverConfig, lower: Option<&[f64]>) -> Result<SolveResult, FemError> {
    let n = system.len();
    if initial.values().len() != n {
        return Err(FemError::LengthMismatch { expected: n, got: initial.values().len() });
    }
    let h = Hierarchy::new(&system.mesh);
    let a = h.permute_matrix(&system.matrix);
    let lap = h.permute_matrix(&system.laplacian);
    let b = h.permute(&system.load);
    let dirichlet: Vec<bool> = h.perm.iter().map(|&v| system.dirichlet[v]).collect();
    let lo: Option<Vec<f64>> = lower.map(|l| h.permute(l));
    let diag = a.diagonal();

    let mut u = h.permute(initial.values());
    for i in 0..n {
        if dirichlet[i] {
            u[i] = system.boundary_values[h.perm[i]];
        } else if let Some(lo) = &lo {
            u[i] = u[i].max(lo[i]);
        }
    }

    let threshold = cfg.threshold(level_tol);
    let max_iterations = cfg.max_iterations.unwrap_or(10 * n).max(1);
    let mut state = Correction { h: &h, a: &a, dirichlet: &dirichlet, cache: None, sweeps: cfg.smoothing_steps };
    let mut previous = u.clone();
    let mut increment = f64::INFINITY;
    let mut iterations = 0;
    while iterations < max_iterations {
        iterations += 1;
        previous.copy_from_slice(&u);
        for _ in 0..cfg.smoothing_steps.max(1) {
            projected_gauss_seidel(&a, &diag, &b, &dirichlet, lo.as_deref(), &mut u);
        }
        if cfg.mode == SolverMode::PgsMultigrid {
            state.apply(&b, lo.as_deref(), &mut u);
        }
        let d: Vec<f64> = u.iter().zip(&previous).map(|(x, y)| x - y).collect();
        increment = lap.bilinear(&d, &d).max(0.0).sqrt();
        if !increment.is_finite() {
            break;
        }
        if increment <= threshold {
            break;
        }
    }
    let converged = increment <= threshold;
    let values = h.unpermute(&u);
    Ok(SolveResult { solution: FeFunction::new(system.mesh.clone(), values)?, iterations, last_increment: increment, converged })
}

/// One projected Gauss–Seidel sweep in index order.
fn projected_gauss_seidel(a: &CsrMatrix, diag: &[f64], b: &[f64], fixed: &[bool], lower: Option<&[f64]>, u: &mut [f64]) {
    for i in 0..u.len() {
        if fixed[i] || diag[i] <= 0.0 {
            continue;
        }
        let (cols, vals) = a.row(i);
        let mut s = b[i];
        for (&j, &v) in cols.iter().zip(vals) {
            if j != i {
                s -= v * u[j];
            }
        }
        let mut x = s / diag[i];
        if let Some(lo) = lower {
            x = x.max(lo[i]);
        }
        u[i] = x;
    }
}

/// Truncated coarse correction; the hierarchy is rebuilt only when the truncation set changes.
struct Correction<'a> {
    h: &'a Hierarchy,
    a: &'a CsrMatrix,
    dirichlet: &'a [bool],
    cache: Option<(Vec<bool>, Multigrid)>,
    sweeps: usize,
}

impl Correction<'_> {
    fn apply(&mut self, b: &[f64], lower: Option<&[f64]>, u: &mut [f64]) {
        let n = u.len();
        let fixed: Vec<bool> = (0..n).map(|i| self.dirichlet[i] || lower.is_some_and(|lo| u[i] <= lo[i])).collect();
        if self.cache.as_ref().is_none_or(|(f, _)| *f != fixed) {
            let mg = Multigrid::new(self.h, self.a, &fixed, self.sweeps);
            self.cache = Some((fixed.clone(), mg));
        }
        let mg = &self.cache.as_ref().expect("cache filled above").1;
        let mut r = self.a.mul_vec(u);
        for i in 0..n {
            r[i] = if fixed[i] { 0.0 } else { b[i] - r[i] };
        }
        let mut c = mg.vcycle(&r);
        let mut omega_max = f64::INFINITY;
        if let Some(lo) = lower {
            for i in 0..n {
                if fixed[i] {
                    c[i] = 0.0;
                    continue;
                }
                c[i] = c[i].max(lo[i] - u[i]);
                if c[i] < 0.0 {
                    omega_max = omega_max.min((u[i] - lo[i]) / -c[i]);
                }
            }
        }
        let ac = self.a.mul_vec(&c);
        let curvature: f64 = c.iter().zip(&ac).map(|(x, y)| x * y).sum();
        if curvature <= 0.0 {
            return;
        }
        let slope: f64 = c.iter().zip(&r).map(|(x, y)| x * y).sum();
        let omega = (slope / curvature).clamp(0.0, omega_max);
        for i in 0..n {
            u[i] += omega * c[i];
            if let Some(lo) = lower {
                if !fixed[i] {
                    u[i] = u[i].max(lo[i]);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::fem::assemble;
    use crate::mesh::{refine_uniform, InitialPartition, Mesh};
    use crate::problems::{Problem, ProblemSample};

    fn tight() -> SolverConfig {
        SolverConfig { sigma_alg: 1.0, ..SolverConfig::default() }
    }

    /// Hand-built system on a mesh with `n + 1` vertices (0..=n along [0,1]).
    fn system_1d(n: usize, load: Vec<f64>, lower: Option<Vec<f64>>) -> DiscreteSystem {
        let mesh = Arc::new(Mesh::initial(Arc::new(InitialPartition::interval(0.0, 1.0, n).unwrap())));
        let mut s = assemble(&ProblemSample::new(|_| 1.0, |_| 0.0), &mesh).unwrap();
        s.load = load;
        s.lower = lower;
        s
    }

    #[test]
    fn negative_load_pins_to_obstacle() {
        let s = system_1d(4, vec![0.0, -1.0, -1.0, -1.0, 0.0], Some(vec![0.0; 5]));
        let u0 = FeFunction::zeros(s.mesh.clone());
        let r = solve_obstacle(&s, &u0, 1e-12, &tight()).unwrap();
        assert!(r.converged);
        assert!(r.solution.values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn scalar_kkt() {
        // one free node between two Dirichlet nodes
        let s = system_1d(2, vec![0.0, -0.3, 0.0], Some(vec![0.0; 3]));
        let r = solve_obstacle(&s, &FeFunction::zeros(s.mesh.clone()), 1e-12, &tight()).unwrap();
        assert_eq!(r.solution.values()[1], 0.0);
        let res = s.residual(r.solution.values());
        assert!(res[1] <= 0.0);
    }

    #[test]
    fn identity_system_solved_in_one_sweep() {
        let mesh = Arc::new(Mesh::initial(Arc::new(InitialPartition::interval(0.0, 1.0, 3).unwrap())));
        let mut s = assemble(&ProblemSample::new(|_| 1.0, |_| 0.0), &mesh).unwrap();
        s.matrix = CsrMatrix::identity(4);
        s.load = vec![0.0, 2.5, -1.0, 0.0];
        let cfg = SolverConfig { mode: SolverMode::Pgs, ..tight() };
        let r = solve_linear(&s, &FeFunction::zeros(mesh), 1e-14, &cfg).unwrap();
        // the second iteration sees a zero increment
        assert_eq!(r.iterations, 2);
        assert_eq!(&r.solution.values()[1..3], &[2.5, -1.0]);
    }

    #[test]
    fn two_by_two_matches_elimination() {
        let mesh = Arc::new(Mesh::initial(Arc::new(InitialPartition::interval(0.0, 1.0, 3).unwrap())));
        let mut s = assemble(&ProblemSample::new(|_| 1.0, |_| 0.0), &mesh).unwrap();
        let free: Vec<usize> = (0..4).filter(|&v| !s.dirichlet[v]).collect();
        let (i, j) = (free[0], free[1]);
        s.matrix = CsrMatrix::from_triplets(4, 4, vec![(0, 0, 1.0), (3, 3, 1.0), (i, i, 4.0), (i, j, 1.0), (j, i, 1.0), (j, j, 3.0)]);
        s.load = vec![0.0; 4];
        s.load[i] = 1.0;
        s.load[j] = 2.0;
        let r = solve_linear(&s, &FeFunction::zeros(mesh), 1e-14, &tight()).unwrap();
        let (x, y) = (1.0 / 11.0, 7.0 / 11.0);
        assert!((r.solution.values()[i] - x).abs() < 1e-12 && (r.solution.values()[j] - y).abs() < 1e-12);
    }

    #[test]
    fn unconstrained_modes_agree() {
        let p = Problem::poisson(10.0).unwrap();
        let s = assemble(&p.sample_at(0.1, -0.05), p.initial_mesh()).unwrap();
        let u0 = FeFunction::zeros(s.mesh.clone());
        let a = solve_linear(&s, &u0, 1e-6, &SolverConfig::default()).unwrap();
        let b = solve_obstacle(&s, &u0, 1e-6, &SolverConfig::default()).unwrap();
        assert_eq!(a.iterations, b.iterations);
        for (x, y) in a.solution.values().iter().zip(b.solution.values()) {
            assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn poisson_galerkin_residual_small() {
        let p = Problem::poisson(10.0).unwrap();
        let s = assemble(&p.sample_at(0.2, 0.1), p.initial_mesh()).unwrap();
        let r = solve_linear(&s, &FeFunction::zeros(s.mesh.clone()), 1e-9, &tight()).unwrap();
        assert!(r.converged);
        let res = s.residual(r.solution.values());
        let bnorm = s.load.iter().map(|x| x * x).sum::<f64>().sqrt();
        for v in 0..res.len() {
            if !s.dirichlet[v] {
                assert!(res[v].abs() <= 1e-8 * bnorm, "{}", res[v]);
            }
        }
    }

    #[test]
    fn multigrid_converges_quickly_on_fine_uniform_mesh() {
        let m = Arc::new(refine_uniform(&Mesh::initial(Arc::new(InitialPartition::square_two_triangles())), 6).unwrap());
        let s = assemble(&ProblemSample::new(|_| 1.0, |_| 1.0), &m).unwrap();
        let r = solve_linear(&s, &FeFunction::zeros(m), 1e-6, &tight()).unwrap();
        assert!(r.converged && r.iterations <= 15, "{} iterations", r.iterations);
    }

    #[test]
    fn pgs_energy_monotone_and_feasible() {
        let p = Problem::obstacle();
        let s = assemble(&p.sample_at(0.3, -0.4), p.initial_mesh()).unwrap();
        let lo = s.lower.clone().unwrap();
        let mut u = vec![0.0; s.len()];
        let diag = s.matrix.diagonal();
        let mut e = s.energy(&u);
        for _ in 0..50 {
            projected_gauss_seidel(&s.matrix, &diag, &s.load, &s.dirichlet, Some(&lo), &mut u);
            let e2 = s.energy(&u);
            assert!(e2 <= e + 1e-15);
            assert!(u.iter().zip(&lo).all(|(x, l)| x >= l));
            e = e2;
        }
    }
}
