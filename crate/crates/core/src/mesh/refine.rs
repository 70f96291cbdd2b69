use rustc_hash::FxHashMap;

use super::{bisect_cell, midpoint, vertex_key, ElementSet, Mesh, NodeId, Point, VertexKey};
use crate::error::MeshError;

/// Mutable leaf set used while bisecting; converted back into a forest at the end.
struct Builder<'a> {
    mesh: &'a Mesh,
    dim: usize,
    coords: Vec<Point>,
    lookup: FxHashMap<VertexKey, u32>,
    leaves: FxHashMap<NodeId, [u32; 3]>,
    edges: FxHashMap<(u32, u32), [Option<NodeId>; 2]>,
    bisected: Vec<NodeId>,
}

fn edge_key(a: u32, b: u32) -> (u32, u32) {
    (a.min(b), a.max(b))
}

fn cell_edges(c: [u32; 3]) -> [(u32, u32); 3] {
    [edge_key(c[0], c[1]), edge_key(c[1], c[2]), edge_key(c[2], c[0])]
}

impl<'a> Builder<'a> {
    fn new(mesh: &'a Mesh) -> Self {
        let dim = mesh.dim();
        let coords = mesh.coords().to_vec();
        let lookup = coords.iter().enumerate().map(|(i, &p)| (vertex_key(p), i as u32)).collect();
        let mut leaves = FxHashMap::default();
        let mut edges: FxHashMap<(u32, u32), [Option<NodeId>; 2]> = FxHashMap::default();
        for e in 0..mesh.num_elements() {
            let mut cell = [0u32; 3];
            for (k, &v) in mesh.element(e).iter().enumerate() {
                cell[k] = v as u32;
            }
            let id = mesh.leaf(e);
            leaves.insert(id, cell);
            if dim == 2 {
                for key in cell_edges(cell) {
                    let slot = edges.entry(key).or_insert([None, None]);
                    if slot[0].is_none() {
                        slot[0] = Some(id);
                    } else {
                        slot[1] = Some(id);
                    }
                }
            }
        }
        Self { mesh, dim, coords, lookup, leaves, edges, bisected: Vec::new() }
    }

    fn midpoint_vertex(&mut self, a: u32, b: u32) -> u32 {
        let p = midpoint(self.coords[a as usize], self.coords[b as usize]);
        let coords = &mut self.coords;
        *self.lookup.entry(vertex_key(p)).or_insert_with(|| {
            coords.push(p);
            (coords.len() - 1) as u32
        })
    }

    fn detach(&mut self, id: NodeId, cell: [u32; 3]) {
        for key in cell_edges(cell) {
            if let Some(slot) = self.edges.get_mut(&key) {
                if slot[0] == Some(id) {
                    slot[0] = slot[1].take();
                } else if slot[1] == Some(id) {
                    slot[1] = None;
                }
                if slot[0].is_none() {
                    self.edges.remove(&key);
                }
            }
        }
    }

    fn attach(&mut self, id: NodeId, cell: [u32; 3]) {
        for key in cell_edges(cell) {
            let slot = self.edges.entry(key).or_insert([None, None]);
            if slot[0].is_none() {
                slot[0] = Some(id);
            } else {
                slot[1] = Some(id);
            }
        }
    }

    fn bisect(&mut self, id: NodeId) -> Result<(), MeshError> {
        let cell = self.leaves.remove(&id).expect("bisect called on a leaf");
        let m = self.midpoint_vertex(cell[0], cell[1]);
        let (c0, c1) = bisect_cell(self.dim, cell, m);
        let (id0, id1) = (id.child(0)?, id.child(1)?);
        if self.dim == 2 {
            self.detach(id, cell);
            self.attach(id0, c0);
            self.attach(id1, c1);
        }
        self.leaves.insert(id0, c0);
        self.leaves.insert(id1, c1);
        self.bisected.push(id);
        Ok(())
    }

    /// Bisects `id` once, first bisecting neighbours as needed to keep the mesh conforming.
    fn refine(&mut self, id: NodeId) -> Result<(), MeshError> {
        if self.dim == 1 {
            if self.leaves.contains_key(&id) {
                self.bisect(id)?;
            }
            return Ok(());
        }
        loop {
            let Some(&cell) = self.leaves.get(&id) else {
                return Ok(());
            };
            let key = edge_key(cell[0], cell[1]);
            let neighbour = self.edges.get(&key).and_then(|slot| slot.iter().flatten().copied().find(|&n| n != id));
            match neighbour {
                None => return self.bisect(id),
                Some(n) => {
                    let nc = self.leaves[&n];
                    if edge_key(nc[0], nc[1]) == key {
                        self.bisect(id)?;
                        return self.bisect(n);
                    }
                    self.refine(n)?;
                }
            }
        }
    }

    /// One bisection of every current leaf, in forest order.
    fn sweep(&mut self) -> Result<(), MeshError> {
        let mut ids: Vec<NodeId> = self.leaves.keys().copied().collect();
        ids.sort_unstable();
        for id in ids {
            self.refine(id)?;
        }
        Ok(())
    }

    fn finish(self) -> Result<Mesh, MeshError> {
        let mut forest = self.mesh.forest().to_vec();
        forest.extend(self.bisected);
        Mesh::from_forest(self.mesh.partition().clone(), forest)
    }
}

/// Refines every element `steps` times: one bisection sweep per step in 1D,
/// two sweeps per step in 2D, so element diameters halve with each step.
pub fn refine_uniform(mesh: &Mesh, steps: usize) -> Result<Mesh, MeshError> {
    if steps == 0 {
        return Ok(mesh.clone());
    }
    let mut b = Builder::new(mesh);
    for _ in 0..steps * mesh.dim() {
        b.sweep()?;
    }
    b.finish()
}

/// Bisects every marked element at least once, adding closure bisections for conformity.
pub fn refine_marked(mesh: &Mesh, marked: &ElementSet) -> Result<Mesh, MeshError> {
    if marked.is_empty() {
        return Err(MeshError::EmptyMarking);
    }
    marked.validate(mesh)?;
    let mut b = Builder::new(mesh);
    for e in marked.iter() {
        b.refine(mesh.leaf(e))?;
    }
    b.finish()
}

/// The coarsest common refinement of two meshes over the same partition.
pub fn union_mesh(a: &Mesh, b: &Mesh) -> Result<Mesh, MeshError> {
    if !a.same_partition(b) {
        return Err(MeshError::PartitionMismatch);
    }
    if a.is_nested_in(b) {
        return Ok(b.clone());
    }
    if b.is_nested_in(a) {
        return Ok(a.clone());
    }
    let mut forest = Vec::with_capacity(a.forest().len() + b.forest().len());
    forest.extend_from_slice(a.forest());
    forest.extend_from_slice(b.forest());
    Mesh::from_forest(a.partition().clone(), forest)
}

/// Union of any number of meshes, built with a single forest merge.
pub fn union_all<'m>(meshes: impl IntoIterator<Item = &'m Mesh>) -> Result<Option<Mesh>, MeshError> {
    let mut it = meshes.into_iter();
    let Some(first) = it.next() else {
        return Ok(None);
    };
    let mut forest = first.forest().to_vec();
    let mut largest = first;
    let mut all_in_largest = true;
    for m in it {
        if !m.same_partition(first) {
            return Err(MeshError::PartitionMismatch);
        }
        if m.forest().len() > largest.forest().len() {
            all_in_largest = all_in_largest && largest.is_nested_in(m);
            largest = m;
        } else {
            all_in_largest = all_in_largest && m.is_nested_in(largest);
        }
        forest.extend_from_slice(m.forest());
    }
    if all_in_largest {
        return Ok(Some(largest.clone()));
    }
    Ok(Some(Mesh::from_forest(first.partition().clone(), forest)?))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::mesh::InitialPartition;

    fn square() -> Mesh {
        Mesh::initial(Arc::new(InitialPartition::square_two_triangles()))
    }

    fn unit(n: usize) -> Mesh {
        Mesh::initial(Arc::new(InitialPartition::interval(0.0, 1.0, n).unwrap()))
    }

    #[test]
    fn uniform_square_vertex_law() {
        let m0 = square();
        for k in 0..=4 {
            let m = refine_uniform(&m0, k).unwrap();
            assert_eq!(m.num_vertices(), (2usize.pow(k as u32) + 1).pow(2), "k = {k}");
            m.check_conforming().unwrap();
        }
    }

    #[test]
    fn four_uniform_steps_give_289_vertices() {
        assert_eq!(refine_uniform(&square(), 4).unwrap().num_vertices(), 289);
    }

    #[test]
    fn sixteen_intervals_refined_once() {
        let m = refine_uniform(&unit(16), 1).unwrap();
        assert_eq!(m.num_vertices(), 33);
    }

    #[test]
    fn zero_steps_is_identity() {
        let m = refine_uniform(&square(), 2).unwrap();
        assert_eq!(refine_uniform(&m, 0).unwrap(), m);
    }

    #[test]
    fn h_halves_per_step() {
        let m0 = refine_uniform(&square(), 1).unwrap();
        let m1 = refine_uniform(&m0, 1).unwrap();
        assert!((m1.h_max() - 0.5 * m0.h_max()).abs() < 1e-14);
    }

    #[test]
    fn interval_bisection() {
        let m = unit(2);
        let r = refine_marked(&m, &ElementSet::new([0])).unwrap();
        let xs: Vec<f64> = {
            let mut v: Vec<f64> = r.coords().iter().map(|p| p[0]).collect();
            v.sort_by(f64::total_cmp);
            v
        };
        assert_eq!(xs, vec![0.0, 0.25, 0.5, 1.0]);
    }

    #[test]
    fn closure_on_two_triangles() {
        let m = square();
        let r = refine_marked(&m, &ElementSet::new([0])).unwrap();
        assert_eq!(r.num_elements(), 4);
        assert_eq!(r.num_vertices(), 5);
        r.check_conforming().unwrap();
    }

    #[test]
    fn closure_propagates_across_generations() {
        let m = refine_uniform(&square(), 1).unwrap();
        let marked = ElementSet::new([0]);
        let r = refine_marked(&m, &marked).unwrap();
        r.check_conforming().unwrap();
        assert!(r.num_vertices() > m.num_vertices());
        assert!(m.is_nested_in(&r));
    }

    #[test]
    fn empty_marking_is_an_error() {
        assert!(matches!(refine_marked(&square(), &ElementSet::default()), Err(MeshError::EmptyMarking)));
    }

    #[test]
    fn invalid_element_rejected() {
        assert!(refine_marked(&square(), &ElementSet::new([7])).is_err());
    }

    #[test]
    fn union_properties() {
        let m = refine_uniform(&square(), 1).unwrap();
        assert_eq!(union_mesh(&m, &m).unwrap(), m);
        let u1 = refine_uniform(&m, 1).unwrap();
        assert_eq!(union_mesh(&u1, &m).unwrap(), u1);
        let a = refine_marked(&m, &ElementSet::new([0])).unwrap();
        let b = refine_marked(&m, &ElementSet::new([5])).unwrap();
        let ab = union_mesh(&a, &b).unwrap();
        ab.check_conforming().unwrap();
        assert!(a.is_nested_in(&ab) && b.is_nested_in(&ab));
        assert_eq!(ab, union_mesh(&b, &a).unwrap());
    }

    #[test]
    fn union_rejects_foreign_partition() {
        assert!(matches!(union_mesh(&square(), &unit(2)), Err(MeshError::PartitionMismatch)));
    }
}
