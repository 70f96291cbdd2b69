use crate::fem::CsrMatrix;
use crate::mesh::Mesh;

/// Vertex ordering by bisection generation: the vertices present after `g`
/// bisection generations are exactly the first `sizes[g]` entries.
#[derive(Debug, Clone)]
pub struct Hierarchy {
    /// Hierarchical index → mesh vertex.
    pub perm: Vec<usize>,
    /// Mesh vertex → hierarchical index.
    pub inv: Vec<usize>,
    pub sizes: Vec<usize>,
    /// Parents (hierarchical indices) of every vertex beyond the initial partition.
    parents: Vec<[usize; 2]>,
}

impl Hierarchy {
    pub fn new(mesh: &Mesh) -> Self {
        let n = mesh.num_vertices();
        let mut perm: Vec<usize> = (0..n).collect();
        perm.sort_by_key(|&v| (mesh.vertex_generation(v), v));
        let mut inv = vec![0; n];
        for (k, &v) in perm.iter().enumerate() {
            inv[v] = k;
        }
        let depth = perm.last().map_or(0, |&v| mesh.vertex_generation(v));
        let mut sizes = vec![0; depth + 1];
        for &v in &perm {
            sizes[mesh.vertex_generation(v)] += 1;
        }
        for g in 1..=depth {
            sizes[g] += sizes[g - 1];
        }
        let parents = perm[sizes[0]..]
            .iter()
            .map(|&v| {
                let [a, b] = mesh.vertex_parents(v).expect("refined vertex has parents");
                let (a, b) = (inv[a], inv[b]);
                [a.min(b), a.max(b)]
            })
            .collect();
        Self { perm, inv, sizes, parents }
    }

    pub fn depth(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn permute(&self, x: &[f64]) -> Vec<f64> {
        self.perm.iter().map(|&v| x[v]).collect()
    }

    pub fn unpermute(&self, x: &[f64]) -> Vec<f64> {
        self.inv.iter().map(|&k| x[k]).collect()
    }

    pub fn permute_matrix(&self, a: &CsrMatrix) -> CsrMatrix {
        let rows = self
            .perm
            .iter()
            .map(|&v| {
                let (cols, vals) = a.row(v);
                let mut row: Vec<(usize, f64)> = cols.iter().zip(vals).map(|(&j, &x)| (self.inv[j], x)).collect();
                row.sort_unstable_by_key(|e| e.0);
                row
            })
            .collect();
        CsrMatrix::from_rows(a.n_cols(), rows)
    }

    /// Interpolation from level `g - 1` to level `g`.
    fn prolongation(&self, g: usize) -> CsrMatrix {
        let (nc, nf) = (self.sizes[g - 1], self.sizes[g]);
        let n0 = self.sizes[0];
        let rows = (0..nf)
            .map(|k| {
                if k < nc {
                    vec![(k, 1.0)]
                } else {
                    let [a, b] = self.parents[k - n0];
                    vec![(a, 0.5), (b, 0.5)]
                }
            })
            .collect();
        CsrMatrix::from_rows(nc, rows)
    }
}

struct Level {
    matrix: CsrMatrix,
    diag: Vec<f64>,
    /// Interpolation from the next coarser level.
    prolong: Option<CsrMatrix>,
}

/// Galerkin hierarchy for a matrix truncated at a set of fixed unknowns.
pub struct Multigrid {
    levels: Vec<Level>,
    coarse: DenseCholesky,
    sweeps: usize,
}

impl Multigrid {
    /// `a` is in hierarchical ordering; rows and columns of `fixed` unknowns are removed
    /// from the finest operator so that corrections vanish there.
    pub fn new(h: &Hierarchy, a: &CsrMatrix, fixed: &[bool], sweeps: usize) -> Self {
        let rows = (0..a.n_rows())
            .map(|i| {
                if fixed[i] {
                    return Vec::new();
                }
                let (cols, vals) = a.row(i);
                cols.iter().zip(vals).filter(|(&j, _)| !fixed[j]).map(|(&j, &v)| (j, v)).collect()
            })
            .collect();
        let mut current = CsrMatrix::from_rows(a.n_cols(), rows);
        let mut levels = Vec::with_capacity(h.depth() + 1);
        for g in (1..=h.depth()).rev() {
            let mut p = h.prolongation(g);
            if g == h.depth() {
                p = truncate_rows(&p, fixed);
            }
            let coarse = current.galerkin(&p);
            let fine = std::mem::replace(&mut current, coarse);
            levels.push(Level { diag: fine.diagonal(), matrix: fine, prolong: Some(p) });
        }
        let coarse = DenseCholesky::new(&current);
        levels.push(Level { diag: current.diagonal(), matrix: current, prolong: None });
        levels.reverse();
        Self { levels, coarse, sweeps: sweeps.max(1) }
    }

    /// One V-cycle for `Ã c = r` from `c = 0`.
    pub fn vcycle(&self, r: &[f64]) -> Vec<f64> {
        self.cycle(self.levels.len() - 1, r)
    }

    fn cycle(&self, g: usize, r: &[f64]) -> Vec<f64> {
        let level = &self.levels[g];
        if g == 0 {
            return self.coarse.solve(r);
        }
        let mut c = vec![0.0; r.len()];
        for _ in 0..self.sweeps {
            gauss_seidel(&level.matrix, &level.diag, r, &mut c, false);
        }
        let mut res = level.matrix.mul_vec(&c);
        for (x, b) in res.iter_mut().zip(r) {
            *x = b - *x;
        }
        let p = level.prolong.as_ref().expect("non-coarsest level has a prolongation");
        let rc = restrict(p, &res);
        let cc = self.cycle(g - 1, &rc);
        let pc = p.mul_vec(&cc);
        for (x, y) in c.iter_mut().zip(&pc) {
            *x += y;
        }
        for _ in 0..self.sweeps {
            gauss_seidel(&level.matrix, &level.diag, r, &mut c, true);
        }
        c
    }
}

fn truncate_rows(p: &CsrMatrix, fixed: &[bool]) -> CsrMatrix {
    let rows = (0..p.n_rows())
        .map(|i| {
            if fixed[i] {
                return Vec::new();
            }
            let (cols, vals) = p.row(i);
            cols.iter().copied().zip(vals.iter().copied()).collect()
        })
        .collect();
    CsrMatrix::from_rows(p.n_cols(), rows)
}

fn restrict(p: &CsrMatrix, r: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; p.n_cols()];
    for (i, &ri) in r.iter().enumerate() {
        let (cols, vals) = p.row(i);
        for (&j, &w) in cols.iter().zip(vals) {
            out[j] += w * ri;
        }
    }
    out
}

/// One Gauss–Seidel sweep for `A x = b`, skipping rows with zero diagonal.
fn gauss_seidel(a: &CsrMatrix, diag: &[f64], b: &[f64], x: &mut [f64], backward: bool) {
    let n = b.len();
    for k in 0..n {
        let i = if backward { n - 1 - k } else { k };
        if diag[i] <= 0.0 {
            continue;
        }
        let (cols, vals) = a.row(i);
        let mut s = b[i];
        for (&j, &v) in cols.iter().zip(vals) {
            if j != i {
                s -= v * x[j];
            }
        }
        x[i] = s / diag[i];
    }
}

/// Cholesky factorization of a small semidefinite matrix; null directions are dropped.
struct DenseCholesky {
    n: usize,
    l: Vec<f64>,
    active: Vec<bool>,
}

impl DenseCholesky {
    fn new(a: &CsrMatrix) -> Self {
        let n = a.n_rows();
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                l[i * n + j] = v;
            }
        }
        let scale = (0..n).map(|i| l[i * n + i]).fold(0.0, f64::max);
        let mut active = vec![true; n];
        for j in 0..n {
            let mut d = l[j * n + j];
            for k in 0..j {
                d -= l[j * n + k] * l[j * n + k];
            }
            if d <= 1e-12 * scale {
                active[j] = false;
                for i in j..n {
                    l[i * n + j] = 0.0;
                }
                continue;
            }
            let d = d.sqrt();
            l[j * n + j] = d;
            for i in j + 1..n {
                let mut s = l[i * n + j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / d;
            }
        }
        Self { n, l, active }
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = vec![0.0; n];
        for i in 0..n {
            if !self.active[i] {
                continue;
            }
            let mut s = b[i];
            for k in 0..i {
                s -= self.l[i * n + k] * y[k];
            }
            y[i] = s / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            if !self.active[i] {
                continue;
            }
            let mut s = y[i];
            for k in i + 1..n {
                s -= self.l[k * n + i] * y[k];
            }
            y[i] = s / self.l[i * n + i];
        }
        y
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::fem::assemble;
    use crate::mesh::{refine_marked, refine_uniform, ElementSet, InitialPartition};
    use crate::problems::ProblemSample;

    #[test]
    fn generations_order_vertices() {
        let m0 = Mesh::initial(Arc::new(InitialPartition::square_two_triangles()));
        let m = refine_uniform(&m0, 2).unwrap();
        let h = Hierarchy::new(&m);
        assert_eq!(h.sizes, vec![4, 5, 9, 13, 25]);
        for k in 0..m.num_vertices() {
            assert_eq!(h.inv[h.perm[k]], k);
        }
    }

    #[test]
    fn cholesky_solves_spd_system() {
        let a = CsrMatrix::from_triplets(3, 3, vec![(0, 0, 4.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 3.0), (2, 2, 2.0), (1, 2, -1.0), (2, 1, -1.0)]);
        let x = DenseCholesky::new(&a).solve(&[1.0, 2.0, 3.0]);
        let r = a.mul_vec(&x);
        for (ri, bi) in r.iter().zip([1.0, 2.0, 3.0]) {
            assert!((ri - bi).abs() < 1e-14);
        }
    }

    #[test]
    fn vcycle_contracts_on_locally_refined_mesh() {
        let m0 = refine_uniform(&Mesh::initial(Arc::new(InitialPartition::square_two_triangles())), 3).unwrap();
        let mut m = m0;
        for _ in 0..6 {
            let n = m.num_elements();
            m = refine_marked(&m, &ElementSet::new([0, n / 2, n - 1])).unwrap();
        }
        let m = Arc::new(m);
        let sys = assemble(&ProblemSample::new(|x| 1.0 + 0.5 * x[0], |_| 1.0), &m).unwrap();
        let h = Hierarchy::new(&m);
        let a = h.permute_matrix(&sys.matrix);
        let fixed = h.permute(&sys.dirichlet.iter().map(|&d| if d { 1.0 } else { 0.0 }).collect::<Vec<_>>());
        let fixed: Vec<bool> = fixed.iter().map(|&x| x > 0.5).collect();
        let mg = Multigrid::new(&h, &a, &fixed, 1);
        let b: Vec<f64> = h.permute(&sys.load).iter().zip(&fixed).map(|(&x, &f)| if f { 0.0 } else { x }).collect();
        let mut x = vec![0.0; b.len()];
        let mut norms = Vec::new();
        for _ in 0..8 {
            let mut r = a.mul_vec(&x);
            for i in 0..r.len() {
                r[i] = if fixed[i] { 0.0 } else { b[i] - r[i] };
            }
            norms.push(r.iter().map(|v| v * v).sum::<f64>().sqrt());
            let c = mg.vcycle(&r);
            for i in 0..x.len() {
                x[i] += c[i];
            }
        }
        let rate = (norms[7] / norms[1]).powf(1.0 / 6.0);
        assert!(rate < 0.5, "contraction {rate}");
    }
}
