use super::{dot, FeFunction, QuadratureRule};
use crate::mesh::{Point, Mesh};
use crate::problems::ProblemSample;

/// Which norm [`norm_h`] evaluates.
#[derive(Debug, Clone, Copy)]
pub enum NormKind<'a> {
    /// `(∫ |∇v|²)^{1/2}`.
    Seminorm,
    /// `(∫ |∇v|² + v²)^{1/2}`.
    FullH1,
    /// `(∫ α |∇v|²)^{1/2}` with the sample's coefficient.
    Energy(&'a ProblemSample),
}

fn element_vertices(mesh: &Mesh, e: usize) -> Vec<Point> {
    mesh.element(e).iter().map(|&v| mesh.vertex(v)).collect()
}

pub fn norm_h(f: &FeFunction, kind: NormKind<'_>) -> f64 {
    let mesh = f.mesh();
    let quad = QuadratureRule::for_dim(mesh.dim());
    let mut sum = 0.0;
    for e in 0..mesh.num_elements() {
        let g = f.gradient(e);
        let g2 = dot(g, g);
        match kind {
            NormKind::Seminorm => sum += mesh.element_measure(e) * g2,
            NormKind::FullH1 => {
                sum += mesh.element_measure(e) * g2;
                let verts = element_vertices(mesh, e);
                for (_, w, lam) in quad.map(&verts) {
                    let v = f.value_in(e, lam);
                    sum += w * v * v;
                }
            }
            NormKind::Energy(sample) => {
                let verts = element_vertices(mesh, e);
                for (x, w, _) in quad.map(&verts) {
                    sum += w * (sample.coefficient)(x) * g2;
                }
            }
        }
    }
    sum.sqrt()
}

/// Distance between `f` and a closed-form function given with its gradient,
/// by elementwise quadrature. `full` adds the L² part.
pub fn h1_error(f: &FeFunction, exact: impl Fn(Point) -> (f64, Point), quad: &QuadratureRule, full: bool) -> f64 {
    let mesh = f.mesh();
    let mut sum = 0.0;
    for e in 0..mesh.num_elements() {
        let g = f.gradient(e);
        let verts = element_vertices(mesh, e);
        for (x, w, lam) in quad.map(&verts) {
            let (u, du) = exact(x);
            let d = [g[0] - du[0], if mesh.dim() == 1 { 0.0 } else { g[1] - du[1] }];
            sum += w * dot(d, d);
            if full {
                let v = f.value_in(e, lam) - u;
                sum += w * v * v;
            }
        }
    }
    sum.sqrt()
}
