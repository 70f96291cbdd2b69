use std::sync::Arc;

use super::{barycentric_gradients, dot, CsrMatrix, FeFunction, QuadratureRule};
use crate::error::FemError;
use crate::mesh::{Mesh, Point};
use crate::problems::ProblemSample;

/// Stiffness matrix, load vector, Dirichlet data and optional lower bound of one pathwise problem.
#[derive(Debug, Clone)]
pub struct DiscreteSystem {
    pub mesh: Arc<Mesh>,
    /// `A_ij = ∫ α ∇φ_j·∇φ_i` over all vertices, Dirichlet rows included.
    pub matrix: CsrMatrix,
    /// `∫ ∇φ_j·∇φ_i`, defines the seminorm.
    pub laplacian: CsrMatrix,
    pub load: Vec<f64>,
    pub dirichlet: Vec<bool>,
    /// Nodal interpolant of the boundary datum (zero off the boundary).
    pub boundary_values: Vec<f64>,
    pub lower: Option<Vec<f64>>,
}

impl DiscreteSystem {
    pub fn len(&self) -> usize {
        self.load.len()
    }

    pub fn is_empty(&self) -> bool {
        self.load.is_empty()
    }

    /// `b - A u`.
    pub fn residual(&self, u: &[f64]) -> Vec<f64> {
        let mut r = self.matrix.mul_vec(u);
        for (ri, bi) in r.iter_mut().zip(&self.load) {
            *ri = bi - *ri;
        }
        r
    }

    /// `½ uᵀAu − bᵀu`.
    pub fn energy(&self, u: &[f64]) -> f64 {
        0.5 * self.matrix.bilinear(u, u) - self.load.iter().zip(u).map(|(b, x)| b * x).sum::<f64>()
    }

    /// Seminorm of a nodal vector on this mesh.
    pub fn seminorm(&self, v: &[f64]) -> f64 {
        self.laplacian.bilinear(v, v).max(0.0).sqrt()
    }

    /// Boundary values at Dirichlet nodes, `x` elsewhere, raised onto the lower bound.
    pub fn make_admissible(&self, x: &mut [f64]) {
        for i in 0..x.len() {
            if self.dirichlet[i] {
                x[i] = self.boundary_values[i];
            } else if let Some(lo) = &self.lower {
                x[i] = x[i].max(lo[i]);
            }
        }
    }

    pub fn function(&self, values: Vec<f64>) -> Result<FeFunction, FemError> {
        FeFunction::new(self.mesh.clone(), values)
    }
}

/// Assembles the pathwise bilinear form and load functional with P1 elements.
pub fn assemble(sample: &ProblemSample, mesh: &Arc<Mesh>) -> Result<DiscreteSystem, FemError> {
    let n = mesh.num_vertices();
    let dim = mesh.dim();
    let quad = QuadratureRule::for_dim(dim);
    let nloc = dim + 1;
    let mut a_trip = Vec::with_capacity(mesh.num_elements() * nloc * nloc);
    let mut l_trip = Vec::with_capacity(mesh.num_elements() * nloc * nloc);
    let mut load = vec![0.0; n];
    let mut verts: Vec<Point> = Vec::with_capacity(3);
    for e in 0..mesh.num_elements() {
        let cell = mesh.element(e);
        verts.clear();
        verts.extend(cell.iter().map(|&v| mesh.vertex(v)));
        let grads = barycentric_gradients(&verts);
        let measure = mesh.element_measure(e);
        let mut int_alpha = 0.0;
        for (x, w, lam) in quad.map(&verts) {
            let alpha = (sample.coefficient)(x);
            if !(alpha > 0.0) {
                return Err(FemError::Ellipticity { value: alpha, x: x[0], y: x[1] });
            }
            int_alpha += w * alpha;
            let f = (sample.source)(x);
            for k in 0..nloc {
                load[cell[k]] += w * f * lam[k];
            }
        }
        for i in 0..nloc {
            for j in 0..nloc {
                let g = dot(grads[i], grads[j]);
                a_trip.push((cell[i], cell[j], int_alpha * g));
                l_trip.push((cell[i], cell[j], measure * g));
            }
        }
    }
    let dirichlet = mesh.boundary_flags().to_vec();
    let boundary_values = mesh
        .coords()
        .iter()
        .zip(&dirichlet)
        .map(|(&p, &d)| if d { (sample.boundary)(p) } else { 0.0 })
        .collect();
    let lower = sample.obstacle.as_ref().map(|psi| mesh.coords().iter().map(|&p| psi(p)).collect());
    Ok(DiscreteSystem {
        mesh: mesh.clone(),
        matrix: CsrMatrix::from_triplets(n, n, a_trip),
        laplacian: CsrMatrix::from_triplets(n, n, l_trip),
        load,
        dirichlet,
        boundary_values,
        lower,
    })
}
