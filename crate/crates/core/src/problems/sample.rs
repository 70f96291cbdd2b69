use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::mesh::Point;

pub type ScalarField = Arc<dyn Fn(Point) -> f64 + Send + Sync>;
/// Closed-form function returning its value and gradient.
pub type ExactField = Arc<dyn Fn(Point) -> (f64, Point) + Send + Sync>;

/// The random parameters that produced a sample.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct SampleParams {
    pub y1: f64,
    pub y2: f64,
    pub beta: Option<f64>,
    pub radius: Option<f64>,
}

/// One realization of the random data of a pathwise problem.
#[derive(Clone)]
pub struct ProblemSample {
    pub coefficient: ScalarField,
    pub source: ScalarField,
    pub boundary: ScalarField,
    pub obstacle: Option<ScalarField>,
    pub exact: Option<ExactField>,
    pub params: SampleParams,
}

impl fmt::Debug for ProblemSample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSample")
            .field("params", &self.params)
            .field("obstacle", &self.obstacle.is_some())
            .field("exact", &self.exact.is_some())
            .finish()
    }
}

impl ProblemSample {
    /// Sample with zero Dirichlet data, no obstacle and no known solution.
    pub fn new(
        coefficient: impl Fn(Point) -> f64 + Send + Sync + 'static,
        source: impl Fn(Point) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            coefficient: Arc::new(coefficient),
            source: Arc::new(source),
            boundary: Arc::new(|_| 0.0),
            obstacle: None,
            exact: None,
            params: SampleParams::default(),
        }
    }

    pub fn with_boundary(mut self, g: impl Fn(Point) -> f64 + Send + Sync + 'static) -> Self {
        self.boundary = Arc::new(g);
        self
    }

    pub fn with_obstacle(mut self, psi: impl Fn(Point) -> f64 + Send + Sync + 'static) -> Self {
        self.obstacle = Some(Arc::new(psi));
        self
    }

    pub fn with_exact(mut self, u: impl Fn(Point) -> (f64, Point) + Send + Sync + 'static) -> Self {
        self.exact = Some(Arc::new(u));
        self
    }

    pub fn with_params(mut self, params: SampleParams) -> Self {
        self.params = params;
        self
    }

    /// Same problem with the source and boundary data multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let (f, g) = (self.source.clone(), self.boundary.clone());
        let exact = self.exact.clone().map(|u| -> ExactField {
            Arc::new(move |x| {
                let (v, d) = u(x);
                (factor * v, [factor * d[0], factor * d[1]])
            })
        });
        Self {
            coefficient: self.coefficient.clone(),
            source: Arc::new(move |x| factor * f(x)),
            boundary: Arc::new(move |x| factor * g(x)),
            obstacle: self.obstacle.clone(),
            exact,
            params: self.params,
        }
    }
}
