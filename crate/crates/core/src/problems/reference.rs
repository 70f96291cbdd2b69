use std::sync::Arc;

use super::{obstacle_radius, Benchmark, ExactField, ParameterLaw, Problem};
use crate::error::ProblemError;
use crate::fem::{gauss_legendre, h1_error, FeFunction, QuadratureRule};
use crate::mesh::{Mesh, Point};

/// Relative change allowed between resolutions `R` and `2R`.
pub const SELF_CONVERGENCE_TOL: f64 = 1e-6;

/// `E[u]` for a benchmark, evaluable with its gradient anywhere in the domain.
#[derive(Clone)]
pub enum ReferenceField {
    /// Deterministic parameters: the single exact solution.
    Exact(ExactField),
    /// Product of two one-dimensional Gaussian averages.
    Poisson { beta: f64, scale: f64, nodes: Vec<f64>, weights: Vec<f64> },
    /// Tensor quadrature nodes sorted by `r²`, with prefix sums of
    /// `w e^{2s}`, `w e^{2s} r²` and `w e^{2s} r⁴`.
    Obstacle { scale: f64, r2: Vec<f64>, sums: Vec<[f64; 3]> },
}

impl std::fmt::Debug for ReferenceField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ReferenceField::Exact(_) => write!(f, "ReferenceField::Exact"),
            ReferenceField::Poisson { beta, nodes, .. } => write!(f, "ReferenceField::Poisson(beta={beta}, n={})", nodes.len()),
            ReferenceField::Obstacle { r2, .. } => write!(f, "ReferenceField::Obstacle(n={})", r2.len()),
        }
    }
}

fn uniform_rule(lo: f64, hi: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
    (x.iter().map(|t| mid + half * t).collect(), w.iter().map(|w| 0.5 * w).collect())
}

impl ReferenceField {
    pub fn new(problem: &Problem, resolution: usize) -> Result<Self, ProblemError> {
        if resolution < 16 {
            return Err(ProblemError::InvalidParameter(format!("reference resolution must be at least 16, got {resolution}")));
        }
        let (lo, hi) = match problem.law {
            ParameterLaw::PointMass { y1, y2 } => {
                let s = problem.sample_at(y1, y2);
                return Ok(ReferenceField::Exact(s.exact.expect("benchmark samples carry exact solutions")));
            }
            ParameterLaw::Uniform { lo, hi } => (lo, hi),
        };
        let (nodes, weights) = uniform_rule(lo, hi, resolution);
        Ok(match problem.benchmark {
            Benchmark::Poisson { beta } => ReferenceField::Poisson { beta, scale: problem.scale, nodes, weights },
            Benchmark::Obstacle => {
                let mut table: Vec<(f64, f64)> = Vec::with_capacity(resolution * resolution);
                for (i, &y1) in nodes.iter().enumerate() {
                    for (j, &y2) in nodes.iter().enumerate() {
                        let r = obstacle_radius(y1, y2);
                        table.push((r * r, weights[i] * weights[j] * (2.0 * (y1 + y2)).exp()));
                    }
                }
                table.sort_by(|a, b| a.0.total_cmp(&b.0));
                let mut acc = [0.0; 3];
                let mut sums = Vec::with_capacity(table.len() + 1);
                sums.push(acc);
                for &(r2, we) in &table {
                    acc[0] += we;
                    acc[1] += we * r2;
                    acc[2] += we * r2 * r2;
                    sums.push(acc);
                }
                ReferenceField::Obstacle { scale: problem.scale, r2: table.into_iter().map(|t| t.0).collect(), sums }
            }
        })
    }

    /// Value and gradient of `E[u]` at `x`.
    pub fn eval(&self, x: Point) -> (f64, Point) {
        match self {
            ReferenceField::Exact(u) => u(x),
            ReferenceField::Poisson { beta, scale, nodes, weights } => {
                let avg = |t: f64| {
                    let (mut v, mut d) = (0.0, 0.0);
                    for (&y, &w) in nodes.iter().zip(weights) {
                        let e = w * (-beta * (t - y) * (t - y)).exp();
                        v += e;
                        d += -2.0 * beta * (t - y) * e;
                    }
                    (v, d)
                };
                let ((a, da), (b, db)) = (avg(x[0]), avg(x[1]));
                (scale * a * b, [scale * da * b, scale * a * db])
            }
            ReferenceField::Obstacle { scale, r2, sums } => {
                let x2 = x[0] * x[0];
                let k = r2.partition_point(|&r| r < x2);
                let [s0, s1, s2] = sums[k];
                let v = (x2 * x2 * s0 - 2.0 * x2 * s1 + s2).max(0.0);
                (scale * v, [scale * 4.0 * x[0] * (x2 * s0 - s1), 0.0])
            }
        }
    }

    /// Distance to `f`: full H¹ norm when `full`, seminorm otherwise.
    pub fn h1_distance(&self, f: &FeFunction, full: bool) -> f64 {
        let quad = QuadratureRule::for_dim(f.mesh().dim());
        h1_error(f, |x| self.eval(x), &quad, full)
    }
}

/// Nodal values of `E[u]` on a mesh.
#[derive(Debug, Clone)]
pub struct ReferenceExpectation {
    pub mesh: Arc<Mesh>,
    pub values: Vec<f64>,
    pub resolution: usize,
}

/// Interpolates `E[u]` on `mesh`, checking that doubling the parameter resolution
/// changes no nodal value by more than [`SELF_CONVERGENCE_TOL`] relative to the largest one.
pub fn reference_expectation(problem: &Problem, mesh: &Arc<Mesh>, resolution: usize) -> Result<ReferenceExpectation, ProblemError> {
    let coarse = ReferenceField::new(problem, resolution)?;
    let fine = ReferenceField::new(problem, 2 * resolution)?;
    let values: Vec<f64> = mesh.coords().iter().map(|&p| coarse.eval(p).0).collect();
    let check: Vec<f64> = mesh.coords().iter().map(|&p| fine.eval(p).0).collect();
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let change = values.iter().zip(&check).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    if scale > 0.0 && change > SELF_CONVERGENCE_TOL * scale {
        return Err(ProblemError::SelfConvergence { resolution, change: change / scale });
    }
    Ok(ReferenceExpectation { mesh: mesh.clone(), values, resolution })
}
