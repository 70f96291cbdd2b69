//! Simplicial meshes stored as refinement forests over a fixed initial partition.
//!
//! A [`Mesh`] is an immutable value: the set of bisected forest nodes fully
//! determines it, and all flat arrays (coordinates, elements, boundary flags)
//! are derived from that set in a canonical order. Two meshes over the same
//! partition can therefore be compared, merged and nested exactly.

mod partition;
mod refine;

use std::io::Write;
use std::sync::Arc;

use rustc_hash::{FxHashMap, FxHashSet};

use crate::error::MeshError;

pub use partition::{midpoint, vertex_key, InitialPartition, Point, VertexKey};
pub use refine::{refine_marked, refine_uniform, union_all, union_mesh};

/// Deepest admissible node of a refinement tree.
pub const MAX_DEPTH: usize = 127;

/// A node of the refinement forest: the root element and the bisection path to it.
///
/// Bit `k` of `path` selects the child taken at depth `k`. Sorting orders nodes by
/// root, then depth, so parents always precede their descendants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId {
    pub root: u32,
    pub depth: u16,
    pub path: u128,
}

impl NodeId {
    pub fn root(r: usize) -> Self {
        Self { root: r as u32, depth: 0, path: 0 }
    }

    pub fn child(self, which: usize) -> Result<Self, MeshError> {
        let d = self.depth as usize;
        if d >= MAX_DEPTH {
            return Err(MeshError::DepthLimit(MAX_DEPTH));
        }
        Ok(Self {
            root: self.root,
            depth: self.depth + 1,
            path: self.path | ((which as u128 & 1) << d),
        })
    }

    pub fn parent(self) -> Option<Self> {
        if self.depth == 0 {
            return None;
        }
        let d = self.depth - 1;
        Some(Self { root: self.root, depth: d, path: self.path & !(1u128 << d) })
    }
}

/// Vertex tuples of the two children of a bisected element.
///
/// 2D: `[a, b, c]` with refinement edge `a–b` and midpoint `m` yields
/// `[a, c, m]` and `[c, b, m]`. 1D: `[a, b]` yields `[a, m]` and `[m, b]`.
pub(crate) fn bisect_cell(dim: usize, cell: [u32; 3], m: u32) -> ([u32; 3], [u32; 3]) {
    let [a, b, c] = cell;
    if dim == 1 {
        ([a, m, 0], [m, b, 0])
    } else {
        ([a, c, m], [c, b, m])
    }
}

/// A set of element indices of one mesh, kept sorted and unique.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ElementSet {
    ids: Vec<usize>,
}

impl ElementSet {
    pub fn new(ids: impl IntoIterator<Item = usize>) -> Self {
        let mut ids: Vec<usize> = ids.into_iter().collect();
        ids.sort_unstable();
        ids.dedup();
        Self { ids }
    }

    pub fn all(mesh: &Mesh) -> Self {
        Self { ids: (0..mesh.num_elements()).collect() }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn contains(&self, id: usize) -> bool {
        self.ids.binary_search(&id).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.ids.iter().copied()
    }

    pub fn validate(&self, mesh: &Mesh) -> Result<(), MeshError> {
        match self.ids.last() {
            Some(&e) if e >= mesh.num_elements() => Err(MeshError::InvalidElement(e)),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Mesh {
    partition: Arc<InitialPartition>,
    forest: Vec<NodeId>,
    coords: Vec<Point>,
    cells: Vec<usize>,
    leaves: Vec<NodeId>,
    parents: Vec<Option<[usize; 2]>>,
    generations: Vec<u16>,
    boundary: Vec<bool>,
    diameters: Vec<f64>,
    lookup: FxHashMap<VertexKey, u32>,
}

impl PartialEq for Mesh {
    fn eq(&self, other: &Self) -> bool {
        self.same_partition(other) && self.forest == other.forest
    }
}

impl Mesh {
    /// The unrefined partition as a mesh.
    pub fn initial(partition: Arc<InitialPartition>) -> Self {
        Self::from_forest(partition, Vec::new()).expect("empty forest is always valid")
    }

    /// Derives the leaf mesh of a forest given by its bisected nodes.
    ///
    /// The node set must be closed under taking parents.
    pub fn from_forest(partition: Arc<InitialPartition>, mut forest: Vec<NodeId>) -> Result<Self, MeshError> {
        forest.sort_unstable();
        forest.dedup();
        let refined: FxHashSet<NodeId> = forest.iter().copied().collect();
        for n in &forest {
            if n.root as usize >= partition.num_elements() {
                return Err(MeshError::InvalidPartition(format!("forest root {} out of range", n.root)));
            }
            if let Some(p) = n.parent() {
                if !refined.contains(&p) {
                    return Err(MeshError::InvalidPartition("forest is not closed under parents".into()));
                }
            }
        }

        let dim = partition.dim();
        let arity = dim + 1;
        let mut coords: Vec<Point> = partition.vertices().to_vec();
        let mut parents = vec![None; coords.len()];
        let mut generations = vec![0u16; coords.len()];
        let mut lookup: FxHashMap<VertexKey, u32> =
            coords.iter().enumerate().map(|(i, &p)| (vertex_key(p), i as u32)).collect();
        let n_leaves = partition.num_elements() + forest.len();
        let mut cells = Vec::with_capacity(n_leaves * arity);
        let mut leaves = Vec::with_capacity(n_leaves);

        let mut stack: Vec<(NodeId, [u32; 3])> = Vec::new();
        for r in 0..partition.num_elements() {
            let el = partition.element(r);
            let mut cell = [0u32; 3];
            for (k, &v) in el.iter().enumerate() {
                cell[k] = v as u32;
            }
            stack.push((NodeId::root(r), cell));
            while let Some((node, cell)) = stack.pop() {
                if refined.contains(&node) {
                    let (a, b) = (cell[0] as usize, cell[1] as usize);
                    let p = midpoint(coords[a], coords[b]);
                    let m = *lookup.entry(vertex_key(p)).or_insert_with(|| {
                        coords.push(p);
                        parents.push(Some([a, b]));
                        generations.push(node.depth + 1);
                        (coords.len() - 1) as u32
                    });
                    generations[m as usize] = generations[m as usize].min(node.depth + 1);
                    let (c0, c1) = bisect_cell(dim, cell, m);
                    stack.push((node.child(1)?, c1));
                    stack.push((node.child(0)?, c0));
                } else {
                    leaves.push(node);
                    cells.extend(cell[..arity].iter().map(|&v| v as usize));
                }
            }
        }

        let n_vertices = coords.len();
        let n_elements = leaves.len();
        let mut boundary = vec![false; n_vertices];
        if dim == 1 {
            let mut count = vec![0u8; n_vertices];
            for &v in &cells {
                count[v] = count[v].saturating_add(1);
            }
            for v in 0..n_vertices {
                boundary[v] = count[v] == 1;
            }
        } else {
            let mut edges: FxHashMap<(usize, usize), u8> = FxHashMap::default();
            for e in 0..n_elements {
                let c = &cells[3 * e..3 * e + 3];
                for (a, b) in [(c[0], c[1]), (c[1], c[2]), (c[2], c[0])] {
                    *edges.entry((a.min(b), a.max(b))).or_default() += 1;
                }
            }
            for (&(a, b), &n) in &edges {
                if n == 1 {
                    boundary[a] = true;
                    boundary[b] = true;
                }
            }
        }

        let diameters = (0..n_elements)
            .map(|e| {
                let c = &cells[arity * e..arity * e + arity];
                let mut h: f64 = 0.0;
                for i in 0..arity {
                    for j in i + 1..arity {
                        let (p, q) = (coords[c[i]], coords[c[j]]);
                        h = h.max(((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt());
                    }
                }
                h
            })
            .collect();

        Ok(Self { partition, forest, coords, cells, leaves, parents, generations, boundary, diameters, lookup })
    }

    pub fn partition(&self) -> &Arc<InitialPartition> {
        &self.partition
    }

    pub fn dim(&self) -> usize {
        self.partition.dim()
    }

    pub fn num_vertices(&self) -> usize {
        self.coords.len()
    }

    pub fn num_elements(&self) -> usize {
        self.leaves.len()
    }

    pub fn coords(&self) -> &[Point] {
        &self.coords
    }

    pub fn vertex(&self, v: usize) -> Point {
        self.coords[v]
    }

    pub fn element(&self, e: usize) -> &[usize] {
        let k = self.dim() + 1;
        &self.cells[k * e..k * e + k]
    }

    pub fn leaf(&self, e: usize) -> NodeId {
        self.leaves[e]
    }

    pub fn leaves(&self) -> &[NodeId] {
        &self.leaves
    }

    /// Bisected nodes, sorted.
    pub fn forest(&self) -> &[NodeId] {
        &self.forest
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.boundary[v]
    }

    pub fn boundary_flags(&self) -> &[bool] {
        &self.boundary
    }

    /// Longest edge of element `e`.
    pub fn diameter(&self, e: usize) -> f64 {
        self.diameters[e]
    }

    pub fn h_max(&self) -> f64 {
        self.diameters.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_depth(&self) -> usize {
        self.leaves.iter().map(|n| n.depth as usize).max().unwrap_or(0)
    }

    /// Endpoints of the edge whose bisection created vertex `v`; `None` for
    /// vertices of the initial partition. Parents always have smaller indices.
    pub fn vertex_parents(&self, v: usize) -> Option<[usize; 2]> {
        self.parents[v]
    }

    /// One more than the depth of the shallowest forest node whose bisection created
    /// `v`; zero for vertices of the initial partition.
    pub fn vertex_generation(&self, v: usize) -> usize {
        self.generations[v] as usize
    }

    pub fn find_vertex(&self, p: Point) -> Option<usize> {
        self.lookup.get(&vertex_key(p)).map(|&v| v as usize)
    }

    pub fn element_measure(&self, e: usize) -> f64 {
        partition::simplex_measure(self.dim(), self.element(e).iter().map(|&v| self.coords[v]))
    }

    pub fn same_partition(&self, other: &Mesh) -> bool {
        Arc::ptr_eq(&self.partition, &other.partition) || *self.partition == *other.partition
    }

    /// Whether every element of `self` is a union of elements of `finer`.
    pub fn is_nested_in(&self, finer: &Mesh) -> bool {
        self.same_partition(finer) && is_sorted_subset(&self.forest, &finer.forest)
    }

    /// Interior edges as `(a, b, [e0, e1])` in 2D; in 1D each element is its own "edge".
    pub fn interior_edges(&self) -> Vec<(usize, usize, [usize; 2])> {
        if self.dim() == 1 {
            return (0..self.num_elements())
                .map(|e| {
                    let c = self.element(e);
                    (c[0].min(c[1]), c[0].max(c[1]), [e, e])
                })
                .collect();
        }
        let mut edges: FxHashMap<(usize, usize), [usize; 2]> = FxHashMap::default();
        let mut out = Vec::new();
        for e in 0..self.num_elements() {
            let c = self.element(e);
            for (a, b) in [(c[0], c[1]), (c[1], c[2]), (c[2], c[0])] {
                let key = (a.min(b), a.max(b));
                match edges.get_mut(&key) {
                    Some(slot) => {
                        slot[1] = e;
                        out.push((key.0, key.1, *slot));
                    }
                    None => {
                        edges.insert(key, [e, usize::MAX]);
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Verifies that the mesh has no hanging nodes and covers the domain.
    pub fn check_conforming(&self) -> Result<(), MeshError> {
        let dim = self.dim();
        let total: f64 = (0..self.num_elements()).map(|e| self.element_measure(e)).sum();
        let domain = self.partition.measure();
        if (total - domain).abs() > 1e-10 * domain {
            return Err(MeshError::NonConforming(format!("element measures sum to {total}, domain has {domain}")));
        }
        if dim == 1 {
            let mut count = vec![0usize; self.num_vertices()];
            for &v in &self.cells {
                count[v] += 1;
            }
            for (v, &c) in count.iter().enumerate() {
                let p = self.coords[v];
                if c == 0 || c > 2 || (c == 1 && !self.partition.on_boundary(p, p)) {
                    return Err(MeshError::NonConforming(format!("vertex {v} belongs to {c} intervals")));
                }
            }
            return Ok(());
        }
        let mut edges: FxHashMap<(usize, usize), usize> = FxHashMap::default();
        for e in 0..self.num_elements() {
            let c = self.element(e);
            for (a, b) in [(c[0], c[1]), (c[1], c[2]), (c[2], c[0])] {
                *edges.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        for (&(a, b), &n) in &edges {
            if n > 2 || (n == 1 && !self.partition.on_boundary(self.coords[a], self.coords[b])) {
                return Err(MeshError::NonConforming(format!("edge ({a}, {b}) belongs to {n} elements")));
            }
        }
        Ok(())
    }

    /// Plain-text dump: a `vertices N` header, then `index x [y]` per line,
    /// then an `elements M` header and `index v0 v1 [v2]` per line.
    pub fn write_dump<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "vertices {}", self.num_vertices())?;
        for (i, p) in self.coords.iter().enumerate() {
            if self.dim() == 1 {
                writeln!(w, "{i} {}", p[0])?;
            } else {
                writeln!(w, "{i} {} {}", p[0], p[1])?;
            }
        }
        writeln!(w, "elements {}", self.num_elements())?;
        for e in 0..self.num_elements() {
            let c = self.element(e);
            let list: Vec<String> = c.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{e} {}", list.join(" "))?;
        }
        Ok(())
    }
}

fn is_sorted_subset(small: &[NodeId], large: &[NodeId]) -> bool {
    if small.len() > large.len() {
        return false;
    }
    let mut it = large.iter();
    'outer: for x in small {
        for y in it.by_ref() {
            if y == x {
                continue 'outer;
            }
            if y > x {
                return false;
            }
        }
        return false;
    }
    true
}
