//! Hierarchical a posteriori error estimation and Dörfler marking.

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::error::FemError;
use crate::fem::{barycentric_gradients, FeFunction, QuadratureRule};
use crate::mesh::{midpoint, ElementSet, Mesh, Point};
use crate::problems::ProblemSample;

/// Local defect of one edge bubble (one element bubble in 1D).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EdgeDefect {
    pub a: usize,
    pub b: usize,
    /// `ℓ(φ_e) − a(u, φ_e)`.
    pub residual: f64,
    /// `a(φ_e, φ_e)`.
    pub energy: f64,
    /// Bubble coefficient after the obstacle clamp.
    pub defect: f64,
    pub eta: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimatorReport {
    pub eta: f64,
    /// `η_t` per element.
    pub indicators: Vec<f64>,
    pub edges: Vec<EdgeDefect>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkingConfig {
    pub theta: f64,
}

// Corners 0..=2 (0..=1 in 1D), then edge midpoints: 3 = m01, 4 = m12, 5 = m20 (2 = m01 in 1D).
const RED_2D: [[usize; 3]; 4] = [[0, 3, 5], [3, 1, 4], [5, 4, 2], [3, 4, 5]];
const EDGES_2D: [(usize, usize, usize); 3] = [(0, 1, 3), (1, 2, 4), (2, 0, 5)];
const SPLIT_1D: [[usize; 3]; 2] = [[0, 2, 0], [2, 1, 0]];

#[derive(Default, Clone, Copy)]
struct Accum {
    load: f64,
    stiff: f64,
    energy: f64,
}

/// Hierarchical estimator with midpoint hats of the uniformly refined mesh.
pub fn estimate_hierarchical(sample: &ProblemSample, mesh: &Mesh, u: &FeFunction) -> Result<EstimatorReport, FemError> {
    if u.values().len() != mesh.num_vertices() {
        return Err(FemError::LengthMismatch { expected: mesh.num_vertices(), got: u.values().len() });
    }
    let dim = mesh.dim();
    let quad = QuadratureRule::for_dim(dim);
    let edges = mesh.interior_edges();
    let index: FxHashMap<(usize, usize), usize> = edges.iter().enumerate().map(|(k, &(a, b, _))| ((a, b), k)).collect();
    let mut acc = vec![Accum::default(); edges.len()];

    let mut pts: Vec<Point> = Vec::with_capacity(6);
    for e in 0..mesh.num_elements() {
        let cell = mesh.element(e);
        let grad_u = u.gradient(e);
        pts.clear();
        pts.extend(cell.iter().map(|&v| mesh.vertex(v)));
        let (subs, local_edges): (&[[usize; 3]], Vec<(usize, usize, usize)>) = if dim == 1 {
            pts.push(midpoint(pts[0], pts[1]));
            (&SPLIT_1D, vec![(0, 1, 2)])
        } else {
            for &(i, j, _) in &EDGES_2D {
                pts.push(midpoint(pts[i], pts[j]));
            }
            (&RED_2D, EDGES_2D.to_vec())
        };
        let slots: Vec<Option<usize>> = local_edges
            .iter()
            .map(|&(i, j, _)| {
                let (a, b) = (cell[i], cell[j]);
                index.get(&(a.min(b), a.max(b))).copied()
            })
            .collect();
        for sub in subs {
            let verts: Vec<Point> = sub[..dim + 1].iter().map(|&k| pts[k]).collect();
            let grads = barycentric_gradients(&verts);
            let (mut int_alpha, mut int_f) = (0.0, [0.0; 3]);
            for (x, w, lam) in quad.map(&verts) {
                int_alpha += w * (sample.coefficient)(x);
                let f = (sample.source)(x);
                for k in 0..=dim {
                    int_f[k] += w * f * lam[k];
                }
            }
            for (slot, &(_, _, m)) in slots.iter().zip(&local_edges) {
                let (Some(slot), Some(k)) = (slot, sub[..dim + 1].iter().position(|&v| v == m)) else {
                    continue;
                };
                let g = grads[k];
                let entry = &mut acc[*slot];
                entry.load += int_f[k];
                entry.stiff += int_alpha * (grad_u[0] * g[0] + grad_u[1] * g[1]);
                entry.energy += int_alpha * (g[0] * g[0] + g[1] * g[1]);
            }
        }
    }

    let semi = semi_contact(sample, mesh, u);
    let mut eta_t2 = vec![0.0; mesh.num_elements()];
    let mut defects = Vec::with_capacity(edges.len());
    for (&(a, b, els), acc) in edges.iter().zip(&acc) {
        if !(acc.energy > 0.0) {
            return Err(FemError::DegenerateBubble { a, b, energy: acc.energy });
        }
        let residual = acc.load - acc.stiff;
        let mut defect = residual / acc.energy;
        if let Some(psi) = &sample.obstacle {
            if !(semi[a] || semi[b]) {
                let m = midpoint(mesh.vertex(a), mesh.vertex(b));
                let u_mid = 0.5 * (u.values()[a] + u.values()[b]);
                defect = defect.max(psi(m) - u_mid);
            }
        }
        let eta = acc.energy.sqrt() * defect.abs();
        if els[0] == els[1] {
            eta_t2[els[0]] += eta * eta;
        } else {
            eta_t2[els[0]] += 0.5 * eta * eta;
            eta_t2[els[1]] += 0.5 * eta * eta;
        }
        defects.push(EdgeDefect { a, b, residual, energy: acc.energy, defect, eta });
    }
    let eta = eta_t2.iter().sum::<f64>().sqrt();
    Ok(EstimatorReport { eta, indicators: eta_t2.iter().map(|x| x.sqrt()).collect(), edges: defects })
}

/// Contact vertices (`u = ψ`) with a non-contact neighbour. Bubbles touching them
/// are left unclamped so a misplaced free boundary stays visible.
fn semi_contact(sample: &ProblemSample, mesh: &Mesh, u: &FeFunction) -> Vec<bool> {
    let n = mesh.num_vertices();
    let Some(psi) = &sample.obstacle else {
        return vec![false; n];
    };
    let contact: Vec<bool> = (0..n).map(|v| u.values()[v] <= psi(mesh.vertex(v))).collect();
    let mut semi = vec![false; n];
    for e in 0..mesh.num_elements() {
        let cell = mesh.element(e);
        if cell.iter().any(|&v| !contact[v]) {
            for &v in cell {
                semi[v] |= contact[v];
            }
        }
    }
    semi
}

/// Smallest set, chosen greedily by decreasing indicator with ties broken by element id,
/// carrying a `theta` fraction of `Σ η_t²`. Empty if all indicators vanish.
pub fn mark_doerfler(report: &EstimatorReport, cfg: &MarkingConfig) -> ElementSet {
    let sq: Vec<f64> = report.indicators.iter().map(|x| x * x).collect();
    let mut order: Vec<usize> = (0..sq.len()).filter(|&i| sq[i] > 0.0).collect();
    order.sort_by(|&i, &j| sq[j].total_cmp(&sq[i]).then(i.cmp(&j)));
    let total: f64 = order.iter().map(|&i| sq[i]).sum();
    if total <= 0.0 {
        return ElementSet::default();
    }
    let target = cfg.theta * total;
    let mut sum = 0.0;
    let mut chosen = Vec::new();
    for &i in &order {
        chosen.push(i);
        sum += sq[i];
        if sum >= target {
            break;
        }
    }
    ElementSet::new(chosen)
}
