use rustc_hash::FxHashMap;

use crate::error::MeshError;

/// Point in the plane; 1D meshes keep the second coordinate at zero.
pub type Point = [f64; 2];

/// Canonical identity of a vertex across every mesh derived from one partition.
///
/// Midpoints are computed symmetrically from the same endpoints in every mesh,
/// so the coordinate bits identify a vertex exactly.
pub type VertexKey = [u64; 2];

pub fn vertex_key(p: Point) -> VertexKey {
    // -0.0 and 0.0 must map to the same key
    let canon = |v: f64| if v == 0.0 { 0.0f64 } else { v };
    [canon(p[0]).to_bits(), canon(p[1]).to_bits()]
}

pub fn midpoint(a: Point, b: Point) -> Point {
    [(a[0] + b[0]) * 0.5, (a[1] + b[1]) * 0.5]
}

/// The fixed coarse partition every refinement forest grows from.
///
/// In 2D each element is stored as `[v0, v1, v2]` with refinement edge `v0–v1`;
/// `v2` is the newest vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialPartition {
    dim: usize,
    vertices: Vec<Point>,
    cells: Vec<usize>,
    boundary: Vec<bool>,
    boundary_segments: Vec<[Point; 2]>,
}

impl InitialPartition {
    pub fn new(dim: usize, vertices: Vec<Point>, cells: Vec<Vec<usize>>) -> Result<Self, MeshError> {
        if dim != 1 && dim != 2 {
            return Err(MeshError::InvalidPartition(format!("dimension {dim} not supported")));
        }
        if cells.is_empty() {
            return Err(MeshError::InvalidPartition("no elements".into()));
        }
        let arity = dim + 1;
        let mut flat = Vec::with_capacity(cells.len() * arity);
        for (e, cell) in cells.iter().enumerate() {
            if cell.len() != arity {
                return Err(MeshError::InvalidPartition(format!("element {e} has {} vertices", cell.len())));
            }
            if let Some(&v) = cell.iter().find(|&&v| v >= vertices.len()) {
                return Err(MeshError::InvalidPartition(format!("element {e} references vertex {v}")));
            }
            let measure = simplex_measure(dim, cell.iter().map(|&v| vertices[v]));
            if !(measure > 0.0) {
                return Err(MeshError::InvalidPartition(format!("element {e} is degenerate")));
            }
            flat.extend_from_slice(cell);
        }

        let mut boundary = vec![false; vertices.len()];
        let mut boundary_segments = Vec::new();
        if dim == 1 {
            let mut count: FxHashMap<usize, usize> = FxHashMap::default();
            for &v in &flat {
                *count.entry(v).or_default() += 1;
            }
            for (&v, &c) in &count {
                if c > 2 {
                    return Err(MeshError::InvalidPartition(format!("vertex {v} shared by {c} intervals")));
                }
                if c == 1 {
                    boundary[v] = true;
                    boundary_segments.push([vertices[v], vertices[v]]);
                }
            }
        } else {
            let mut edges: FxHashMap<(usize, usize), Vec<usize>> = FxHashMap::default();
            for e in 0..cells.len() {
                let c = &flat[3 * e..3 * e + 3];
                for (a, b) in [(c[0], c[1]), (c[1], c[2]), (c[2], c[0])] {
                    edges.entry((a.min(b), a.max(b))).or_default().push(e);
                }
            }
            for (&(a, b), elems) in &edges {
                if elems.len() > 2 {
                    return Err(MeshError::InvalidPartition(format!("edge ({a}, {b}) shared by {} elements", elems.len())));
                }
                if elems.len() == 1 {
                    boundary[a] = true;
                    boundary[b] = true;
                    boundary_segments.push([vertices[a], vertices[b]]);
                }
            }
            // compatible labeling: neighbours across a refinement edge share it
            for e in 0..cells.len() {
                let (a, b) = (flat[3 * e], flat[3 * e + 1]);
                let key = (a.min(b), a.max(b));
                for &n in &edges[&key] {
                    if n == e {
                        continue;
                    }
                    let (na, nb) = (flat[3 * n], flat[3 * n + 1]);
                    if (na.min(nb), na.max(nb)) != key {
                        return Err(MeshError::InvalidPartition(format!(
                            "elements {e} and {n} do not share their refinement edge"
                        )));
                    }
                }
            }
        }
        boundary_segments.sort_by(|x, y| x.partial_cmp(y).unwrap());

        Ok(Self { dim, vertices, cells: flat, boundary, boundary_segments })
    }

    /// `[a, b]` split into `n` equal intervals.
    pub fn interval(a: f64, b: f64, n: usize) -> Result<Self, MeshError> {
        if n == 0 || !(b > a) {
            return Err(MeshError::InvalidPartition("empty interval".into()));
        }
        let vertices = (0..=n).map(|i| [a + (b - a) * i as f64 / n as f64, 0.0]).collect();
        let cells = (0..n).map(|i| vec![i, i + 1]).collect();
        Self::new(1, vertices, cells)
    }

    /// `[-1, 1]^2` split along the diagonal into two right triangles with the
    /// right angles at `(1, -1)` and `(-1, 1)`; the diagonal is the refinement edge.
    pub fn square_two_triangles() -> Self {
        let vertices = vec![[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];
        let cells = vec![vec![0, 2, 1], vec![2, 0, 3]];
        Self::new(2, vertices, cells).expect("static partition is valid")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn num_elements(&self) -> usize {
        self.cells.len() / (self.dim + 1)
    }

    pub fn element(&self, e: usize) -> &[usize] {
        let k = self.dim + 1;
        &self.cells[k * e..k * e + k]
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary[v]
    }

    /// Whether the segment `p`–`q` lies on the domain boundary.
    pub(crate) fn on_boundary(&self, p: Point, q: Point) -> bool {
        let eps = 1e-12;
        self.boundary_segments.iter().any(|&[a, b]| {
            if self.dim == 1 {
                (p[0] - a[0]).abs() < eps && (q[0] - a[0]).abs() < eps
            } else {
                on_segment(p, a, b, eps) && on_segment(q, a, b, eps)
            }
        })
    }

    pub fn measure(&self) -> f64 {
        (0..self.num_elements())
            .map(|e| simplex_measure(self.dim, self.element(e).iter().map(|&v| self.vertices[v])))
            .sum()
    }
}

fn on_segment(p: Point, a: Point, b: Point, eps: f64) -> bool {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let cross = (p[0] - a[0]) * dy - (p[1] - a[1]) * dx;
    let len2 = dx * dx + dy * dy;
    if cross.abs() > eps * len2.sqrt() {
        return false;
    }
    let t = ((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2;
    (-eps..=1.0 + eps).contains(&t)
}

pub(crate) fn simplex_measure(dim: usize, mut pts: impl Iterator<Item = Point>) -> f64 {
    let p0 = pts.next().unwrap();
    let p1 = pts.next().unwrap();
    if dim == 1 {
        return (p1[0] - p0[0]).abs();
    }
    let p2 = pts.next().unwrap();
    0.5 * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1])).abs()
}
