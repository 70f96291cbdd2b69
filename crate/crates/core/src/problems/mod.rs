//! Benchmark problem families, seeded sampling and reference expectations.

mod reference;
mod sample;
mod seed;

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use reference::{reference_expectation, ReferenceExpectation, ReferenceField};
pub use sample::{ExactField, ProblemSample, SampleParams, ScalarField};
pub use seed::{SeedPath, Stream};

use crate::error::ProblemError;
use crate::mesh::{refine_uniform, InitialPartition, Mesh, Point};

/// Which benchmark family a problem belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Benchmark {
    /// `−Δu = f` on `(−1,1)²` with a Gaussian peak at a random point.
    Poisson { beta: f64 },
    /// Obstacle problem `u ≥ 0` on `(0,1)` with a random coefficient.
    Obstacle,
}

/// Distribution of the two parameters `(Y1, Y2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ParameterLaw {
    /// Independent `U(lo, hi)` components.
    Uniform { lo: f64, hi: f64 },
    /// Every draw returns the same point.
    PointMass { y1: f64, y2: f64 },
}

impl ParameterLaw {
    pub fn draw(&self, seed: &SeedPath) -> (f64, f64) {
        match *self {
            ParameterLaw::Uniform { lo, hi } => {
                let mut rng = seed.rng();
                let (a, b): (f64, f64) = (rng.gen(), rng.gen());
                (lo + (hi - lo) * a, lo + (hi - lo) * b)
            }
            ParameterLaw::PointMass { y1, y2 } => (y1, y2),
        }
    }

    pub fn is_deterministic(&self) -> bool {
        matches!(self, ParameterLaw::PointMass { .. })
    }
}

/// A benchmark together with its parameter law and initial meshes.
#[derive(Debug, Clone)]
pub struct Problem {
    pub benchmark: Benchmark,
    pub law: ParameterLaw,
    /// Multiplies source and boundary data.
    pub scale: f64,
    coarsest: Arc<Mesh>,
    initial: Arc<Mesh>,
}

impl Problem {
    pub fn poisson(beta: f64) -> Result<Self, ProblemError> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(ProblemError::InvalidParameter(format!("beta must be positive, got {beta}")));
        }
        let coarsest = Arc::new(Mesh::initial(Arc::new(InitialPartition::square_two_triangles())));
        let initial = Arc::new(refine_uniform(&coarsest, 4).expect("uniform refinement of the square"));
        Ok(Self {
            benchmark: Benchmark::Poisson { beta },
            law: ParameterLaw::Uniform { lo: -0.25, hi: 0.25 },
            scale: 1.0,
            coarsest,
            initial,
        })
    }

    pub fn obstacle() -> Self {
        let partition = InitialPartition::interval(0.0, 1.0, 16).expect("valid interval");
        let initial = Arc::new(Mesh::initial(Arc::new(partition)));
        Self {
            benchmark: Benchmark::Obstacle,
            law: ParameterLaw::Uniform { lo: -1.0, hi: 1.0 },
            scale: 1.0,
            coarsest: initial.clone(),
            initial,
        }
    }

    pub fn with_law(mut self, law: ParameterLaw) -> Self {
        self.law = law;
        self
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn name(&self) -> &'static str {
        match self.benchmark {
            Benchmark::Poisson { .. } => "poisson",
            Benchmark::Obstacle => "obstacle",
        }
    }

    pub fn dim(&self) -> usize {
        self.initial.dim()
    }

    /// The mesh every pathwise solve starts from.
    pub fn initial_mesh(&self) -> &Arc<Mesh> {
        &self.initial
    }

    /// The unrefined partition underlying [`Problem::initial_mesh`].
    pub fn coarsest_mesh(&self) -> &Arc<Mesh> {
        &self.coarsest
    }

    pub fn has_obstacle(&self) -> bool {
        matches!(self.benchmark, Benchmark::Obstacle)
    }

    pub fn default_theta(&self) -> f64 {
        match self.benchmark {
            Benchmark::Poisson { .. } => 0.4,
            Benchmark::Obstacle => 0.2,
        }
    }

    pub fn default_m_min(&self) -> usize {
        match self.benchmark {
            Benchmark::Poisson { .. } => 100,
            Benchmark::Obstacle => 50,
        }
    }

    pub fn sample(&self, seed: &SeedPath) -> ProblemSample {
        let (y1, y2) = self.law.draw(seed);
        self.sample_at(y1, y2)
    }

    pub fn sample_at(&self, y1: f64, y2: f64) -> ProblemSample {
        let s = match self.benchmark {
            Benchmark::Poisson { beta } => poisson_sample(y1, y2, beta),
            Benchmark::Obstacle => obstacle_sample(y1, y2),
        };
        if self.scale == 1.0 {
            s
        } else {
            s.scaled(self.scale)
        }
    }

    /// `E[u]` as a closed-form field, by tensor Gauss–Legendre quadrature in the parameters.
    pub fn reference(&self, resolution: usize) -> Result<ReferenceField, ProblemError> {
        ReferenceField::new(self, resolution)
    }
}

/// Poisson benchmark sample drawn from `seed`.
pub fn sample_poisson(seed: &SeedPath, beta: f64) -> Result<ProblemSample, ProblemError> {
    Ok(Problem::poisson(beta)?.sample(seed))
}

/// Obstacle benchmark sample drawn from `seed`.
pub fn sample_obstacle(seed: &SeedPath) -> ProblemSample {
    Problem::obstacle().sample(seed)
}

/// `u = exp(−β|x−Y|²)`, `f = −Δu`, `g = u` on the boundary.
pub fn poisson_sample(y1: f64, y2: f64, beta: f64) -> ProblemSample {
    let u = move |x: Point| {
        let (dx, dy) = (x[0] - y1, x[1] - y2);
        let v = (-beta * (dx * dx + dy * dy)).exp();
        (v, [-2.0 * beta * dx * v, -2.0 * beta * dy * v])
    };
    let f = move |x: Point| {
        let r2 = (x[0] - y1).powi(2) + (x[1] - y2).powi(2);
        (-beta * r2).exp() * (4.0 * beta - 4.0 * beta * beta * r2)
    };
    ProblemSample::new(|_| 1.0, f)
        .with_boundary(move |x| u(x).0)
        .with_exact(u)
        .with_params(SampleParams { y1, y2, beta: Some(beta), radius: None })
}

/// Contact radius `r = 0.7 + (Y1+Y2)/10` of the obstacle benchmark.
pub fn obstacle_radius(y1: f64, y2: f64) -> f64 {
    0.7 + (y1 + y2) / 10.0
}

/// Obstacle benchmark coefficient `α = 1 + cos(x²)Y1/10 + sin(x²)Y2/10`.
pub fn obstacle_coefficient(x: f64, y1: f64, y2: f64) -> f64 {
    let s = x * x;
    1.0 + s.cos() * y1 / 10.0 + s.sin() * y2 / 10.0
}

/// `u = max((x²−r²)e^{Y1+Y2}, 0)²`, zero obstacle, boundary data `g = u`
/// (nonzero at `x = 1`), and `f = −(αu′)′` where `u > 0`.
pub fn obstacle_sample(y1: f64, y2: f64) -> ProblemSample {
    let r = obstacle_radius(y1, y2);
    let r2 = r * r;
    let e1 = (y1 + y2).exp();
    let e2 = e1 * e1;
    let dalpha = move |x: f64| {
        let s = x * x;
        -s.sin() * y1 / 10.0 + s.cos() * y2 / 10.0
    };
    let f = move |p: Point| {
        let x = p[0];
        let (a, b, s) = (obstacle_coefficient(x, y1, y2), dalpha(x), x * x);
        if x > r {
            -4.0 * e2 * (a * (3.0 * s - r2) + 2.0 * s * (s - r2) * b)
        } else {
            4.0 * r2 * e2 * (a * (-1.0 - r2 + s) + (-2.0 - 2.0 * r2 + s) * s * b)
        }
    };
    let u = move |p: Point| {
        let x = p[0];
        let t = ((x * x - r2) * e1).max(0.0);
        (t * t, [if t > 0.0 { 4.0 * x * (x * x - r2) * e2 } else { 0.0 }, 0.0])
    };
    ProblemSample::new(move |p| obstacle_coefficient(p[0], y1, y2), f)
        .with_obstacle(|_| 0.0)
        .with_boundary(move |p| u(p).0)
        .with_exact(u)
        .with_params(SampleParams { y1, y2, beta: None, radius: Some(r) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seed(i: u64) -> SeedPath {
        SeedPath::new(3, 1, i, 0, Stream::Test)
    }

    #[test]
    fn poisson_closed_forms() {
        let beta = 10.0;
        let s = poisson_sample(0.0, 0.0, beta);
        let u = s.exact.as_ref().unwrap();
        assert_eq!(u([0.0, 0.0]).0, 1.0);
        let p = [(1.0 / beta).sqrt(), 0.0];
        assert!((u(p).0 - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!((s.source)([0.0, 0.0]), 4.0 * beta);
        assert_eq!((s.coefficient)([0.3, 0.1]), 1.0);
    }

    #[test]
    fn poisson_source_is_negative_laplacian() {
        let prob = Problem::poisson(10.0).unwrap();
        let h = 1e-4;
        for i in 0..10 {
            let s = prob.sample(&seed(i));
            let x: Point = [-0.9 + 0.17 * i as f64, 0.8 - 0.15 * i as f64];
            let u = |p: Point| s.exact.as_ref().unwrap()(p).0;
            let lap = (u([x[0] + h, x[1]]) + u([x[0] - h, x[1]]) + u([x[0], x[1] + h]) + u([x[0], x[1] - h]) - 4.0 * u(x)) / (h * h);
            let f = (s.source)(x);
            assert!((f + lap).abs() <= 1e-6 * f.abs().max(1.0), "{f} vs {}", -lap);
        }
    }

    #[test]
    fn poisson_gradient_matches_finite_differences() {
        let s = poisson_sample(0.1, -0.2, 50.0);
        let u = s.exact.as_ref().unwrap();
        let x = [0.05, -0.1];
        let h = 1e-6;
        let (_, g) = u(x);
        let gx = (u([x[0] + h, x[1]]).0 - u([x[0] - h, x[1]]).0) / (2.0 * h);
        let gy = (u([x[0], x[1] + h]).0 - u([x[0], x[1] - h]).0) / (2.0 * h);
        assert!((g[0] - gx).abs() < 1e-7 && (g[1] - gy).abs() < 1e-7);
    }

    #[test]
    fn obstacle_closed_forms() {
        let s = obstacle_sample(0.0, 0.0);
        let u = s.exact.as_ref().unwrap();
        assert!((u([1.0, 0.0]).0 - 0.2601).abs() < 1e-14);
        for k in 0..=70 {
            assert_eq!(u([k as f64 / 100.0, 0.0]).0, 0.0);
        }
        let s = obstacle_sample(1.0, 0.0);
        assert!(((s.coefficient)([0.0, 0.0]) - 1.1).abs() < 1e-15);
        assert!((s.params.radius.unwrap() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn obstacle_exact_solution_complementarity() {
        let prob = Problem::obstacle();
        for i in 0..5 {
            let s = prob.sample(&seed(i));
            let r = s.params.radius.unwrap();
            let flux = |x: f64| (s.coefficient)([x, 0.0]) * s.exact.as_ref().unwrap()([x, 0.0]).1[0];
            let h = 1e-5;
            for k in 1..=20 {
                let x = k as f64 / 21.0;
                if (x - r).abs() < 2.0 * h {
                    continue;
                }
                let res = -(flux(x + h) - flux(x - h)) / (2.0 * h) - (s.source)([x, 0.0]);
                if x < r {
                    assert!(res >= -1e-6, "x={x} res={res}");
                } else {
                    assert!(res.abs() <= 1e-6 * (s.source)([x, 0.0]).abs().max(1.0), "x={x} res={res}");
                }
            }
        }
    }

    #[test]
    fn obstacle_coefficient_bounds() {
        let prob = Problem::obstacle();
        let bound = 2f64.sqrt() / 10.0;
        for i in 0..10_000u64 {
            let s = prob.sample(&seed(i));
            let x = (i as f64 * 0.618_033_988_75).fract();
            let a = (s.coefficient)([x, 0.0]);
            assert!(a >= 1.0 - bound && a <= 1.0 + bound);
        }
    }

    #[test]
    fn sampling_is_reproducible() {
        let prob = Problem::poisson(10.0).unwrap();
        assert_eq!(prob.sample(&seed(5)).params, prob.sample(&seed(5)).params);
        assert_ne!(prob.sample(&seed(5)).params, prob.sample(&seed(6)).params);
        let p = prob.sample(&seed(9)).params;
        assert!(p.y1.abs() <= 0.25 && p.y2.abs() <= 0.25);
    }

    #[test]
    fn initial_meshes() {
        assert_eq!(Problem::poisson(10.0).unwrap().initial_mesh().num_vertices(), 289);
        assert_eq!(Problem::obstacle().initial_mesh().num_vertices(), 17);
        assert!(Problem::poisson(0.0).is_err());
    }
}
