use std::sync::Arc;

use super::{barycentric_gradients, CsrMatrix};
use crate::error::{FemError, MeshError};
use crate::mesh::{Mesh, Point};

/// Continuous piecewise linear function given by its nodal values on a mesh.
#[derive(Debug, Clone)]
pub struct FeFunction {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
}

impl FeFunction {
    pub fn new(mesh: Arc<Mesh>, values: Vec<f64>) -> Result<Self, FemError> {
        if values.len() != mesh.num_vertices() {
            return Err(FemError::LengthMismatch { expected: mesh.num_vertices(), got: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(FemError::NonFinite(i));
        }
        Ok(Self { mesh, values })
    }

    pub fn zeros(mesh: Arc<Mesh>) -> Self {
        let n = mesh.num_vertices();
        Self { mesh, values: vec![0.0; n] }
    }

    /// Nodal interpolant of `f`.
    pub fn interpolate(mesh: Arc<Mesh>, f: impl Fn(Point) -> f64) -> Self {
        let values = mesh.coords().iter().map(|&p| f(p)).collect();
        Self { mesh, values }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Constant gradient on element `e`.
    pub fn gradient(&self, e: usize) -> Point {
        let cell = self.mesh.element(e);
        let verts: Vec<Point> = cell.iter().map(|&v| self.mesh.vertex(v)).collect();
        let grads = barycentric_gradients(&verts);
        let mut g = [0.0; 2];
        for (k, &v) in cell.iter().enumerate() {
            g[0] += self.values[v] * grads[k][0];
            g[1] += self.values[v] * grads[k][1];
        }
        g
    }

    /// Value at barycentric coordinates `lam` of element `e`.
    pub fn value_in(&self, e: usize, lam: [f64; 3]) -> f64 {
        self.mesh.element(e).iter().enumerate().map(|(k, &v)| lam[k] * self.values[v]).sum()
    }

    /// `self + factor * other`, on the union of both meshes.
    pub fn add_scaled(&self, other: &FeFunction, factor: f64) -> Result<FeFunction, FemError> {
        let (a, b) = if Arc::ptr_eq(&self.mesh, &other.mesh) || *self.mesh == *other.mesh {
            (self.clone(), other.values.clone())
        } else {
            let union = Arc::new(crate::mesh::union_mesh(&self.mesh, &other.mesh)?);
            (prolong(self, &union)?, prolong(other, &union)?.values)
        };
        let values = a.values.iter().zip(&b).map(|(x, y)| x + factor * y).collect();
        Ok(FeFunction { mesh: a.mesh, values })
    }

    pub fn scale(&mut self, factor: f64) {
        self.values.iter_mut().for_each(|v| *v *= factor);
    }
}

/// Exact representation of `f` on a mesh that refines `f`'s mesh.
pub fn prolong(f: &FeFunction, fine: &Arc<Mesh>) -> Result<FeFunction, FemError> {
    if Arc::ptr_eq(f.mesh(), fine) || f.mesh().forest() == fine.forest() && f.mesh().same_partition(fine) {
        return Ok(FeFunction { mesh: fine.clone(), values: f.values.clone() });
    }
    if !f.mesh().is_nested_in(fine) {
        return Err(MeshError::NotNested.into());
    }
    let coarse = f.mesh();
    let mut values = vec![0.0; fine.num_vertices()];
    for (v, &p) in fine.coords().iter().enumerate() {
        values[v] = match coarse.find_vertex(p) {
            Some(c) => f.values[c],
            None => {
                let [a, b] = fine.vertex_parents(v).ok_or(MeshError::NotNested)?;
                0.5 * (values[a] + values[b])
            }
        };
    }
    Ok(FeFunction { mesh: fine.clone(), values })
}

/// Matrix of [`prolong`]: `fine.num_vertices() × coarse.num_vertices()`.
pub fn prolongation_matrix(coarse: &Mesh, fine: &Mesh) -> Result<CsrMatrix, FemError> {
    if !coarse.is_nested_in(fine) {
        return Err(MeshError::NotNested.into());
    }
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(fine.num_vertices());
    for (v, &p) in fine.coords().iter().enumerate() {
        let row = match coarse.find_vertex(p) {
            Some(c) => vec![(c, 1.0)],
            None => {
                let [a, b] = fine.vertex_parents(v).ok_or(MeshError::NotNested)?;
                merge_half(&rows[a], &rows[b])
            }
        };
        rows.push(row);
    }
    Ok(CsrMatrix::from_rows(coarse.num_vertices(), rows))
}

fn merge_half(x: &[(usize, f64)], y: &[(usize, f64)]) -> Vec<(usize, f64)> {
    let mut out = Vec::with_capacity(x.len() + y.len());
    let (mut i, mut j) = (0, 0);
    while i < x.len() || j < y.len() {
        if j == y.len() || (i < x.len() && x[i].0 < y[j].0) {
            out.push((x[i].0, 0.5 * x[i].1));
            i += 1;
        } else if i == x.len() || y[j].0 < x[i].0 {
            out.push((y[j].0, 0.5 * y[j].1));
            j += 1;
        } else {
            out.push((x[i].0, 0.5 * (x[i].1 + y[j].1)));
            i += 1;
            j += 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{refine_marked, refine_uniform, ElementSet, InitialPartition};

    #[test]
    fn prolong_to_same_mesh_is_identity() {
        let m = Arc::new(Mesh::initial(Arc::new(InitialPartition::interval(0.0, 1.0, 3).unwrap())));
        let f = FeFunction::new(m.clone(), vec![0.0, 2.0, -1.0, 4.0]).unwrap();
        assert_eq!(prolong(&f, &m).unwrap().values(), f.values());
    }

    #[test]
    fn prolong_midpoint_average() {
        let m = Arc::new(Mesh::initial(Arc::new(InitialPartition::interval(0.0, 1.0, 1).unwrap())));
        let f = FeFunction::new(m.clone(), vec![0.0, 1.0]).unwrap();
        let fine = Arc::new(refine_uniform(&m, 1).unwrap());
        let g = prolong(&f, &fine).unwrap();
        let half = fine.find_vertex([0.5, 0.0]).unwrap();
        assert_eq!(g.values()[half], 0.5);
    }

    #[test]
    fn prolong_rejects_non_nested() {
        let m = Arc::new(Mesh::initial(Arc::new(InitialPartition::interval(0.0, 1.0, 2).unwrap())));
        let a = Arc::new(refine_marked(&m, &ElementSet::new([0])).unwrap());
        let b = Arc::new(refine_marked(&m, &ElementSet::new([1])).unwrap());
        assert!(prolong(&FeFunction::zeros(a), &b).is_err());
    }

    #[test]
    fn matrix_matches_prolong() {
        let m = Arc::new(refine_uniform(&Mesh::initial(Arc::new(InitialPartition::square_two_triangles())), 1).unwrap());
        let fine = Arc::new(refine_marked(&refine_uniform(&m, 1).unwrap(), &ElementSet::new([0, 3])).unwrap());
        let f = FeFunction::interpolate(m.clone(), |p| p[0] * p[0] - 2.0 * p[1]);
        let p = prolongation_matrix(&m, &fine).unwrap();
        let direct = prolong(&f, &fine).unwrap();
        let via = p.mul_vec(f.values());
        for (a, b) in direct.values().iter().zip(&via) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn length_and_finiteness_checked() {
        let m = Arc::new(Mesh::initial(Arc::new(InitialPartition::interval(0.0, 1.0, 1).unwrap())));
        assert!(FeFunction::new(m.clone(), vec![0.0]).is_err());
        assert!(FeFunction::new(m, vec![0.0, f64::NAN]).is_err());
    }
}
