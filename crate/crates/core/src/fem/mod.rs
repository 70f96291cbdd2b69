//! P1 finite elements: quadrature, sparse matrices, assembly, prolongation and norms.

mod assembly;
mod function;
mod norms;
mod quadrature;
mod sparse;

pub use assembly::{assemble, DiscreteSystem};
pub use function::{prolong, prolongation_matrix, FeFunction};
pub use norms::{h1_error, norm_h, NormKind};
pub use quadrature::{gauss_legendre, QuadratureRule};
pub use sparse::CsrMatrix;

use crate::mesh::Point;

/// Gradients of the barycentric coordinates of a simplex (interval or triangle).
pub fn barycentric_gradients(verts: &[Point]) -> [Point; 3] {
    if verts.len() == 2 {
        let h = verts[1][0] - verts[0][0];
        return [[-1.0 / h, 0.0], [1.0 / h, 0.0], [0.0, 0.0]];
    }
    let (p0, p1, p2) = (verts[0], verts[1], verts[2]);
    let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
    let g1 = [(p2[1] - p0[1]) / det, -(p2[0] - p0[0]) / det];
    let g2 = [-(p1[1] - p0[1]) / det, (p1[0] - p0[0]) / det];
    [[-g1[0] - g2[0], -g1[1] - g2[1]], g1, g2]
}

pub(crate) fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}
