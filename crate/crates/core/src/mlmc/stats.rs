use std::sync::Arc;

use serde::Serialize;

use super::PathwiseResult;
use crate::error::MlmcError;
use crate::fem::{norm_h, prolong, FeFunction, NormKind};
use crate::mesh::{union_all, Mesh};

fn union_of<'a>(fs: impl IntoIterator<Item = &'a FeFunction>) -> Result<Arc<Mesh>, MlmcError> {
    let meshes: Vec<&Arc<Mesh>> = fs.into_iter().map(FeFunction::mesh).collect();
    if let Some(first) = meshes.first() {
        if meshes.iter().all(|m| Arc::ptr_eq(m, first)) {
            return Ok((*first).clone());
        }
    }
    let u = union_all(meshes.iter().map(|m| m.as_ref()))?.ok_or_else(|| MlmcError::Invalid("no samples".into()))?;
    Ok(Arc::new(u))
}

/// Nodal sum of the inputs on the union of their meshes.
fn sum_on_union<'a>(fs: &[&'a FeFunction]) -> Result<FeFunction, MlmcError> {
    let mesh = union_of(fs.iter().copied())?;
    let mut acc = vec![0.0; mesh.num_vertices()];
    for f in fs {
        let p = prolong(f, &mesh)?;
        for (a, v) in acc.iter_mut().zip(p.values()) {
            *a += v;
        }
    }
    Ok(FeFunction::new(mesh, acc)?)
}

/// `E_M[v] = (1/M) Σ v_i` on the union mesh of the inputs.
pub fn mc_mean(results: &[FeFunction]) -> Result<FeFunction, MlmcError> {
    if results.is_empty() {
        return Err(MlmcError::Invalid("mean of an empty sample".into()));
    }
    let refs: Vec<&FeFunction> = results.iter().collect();
    let mut s = sum_on_union(&refs)?;
    s.scale(1.0 / results.len() as f64);
    Ok(s)
}

/// `‖v‖_H`, the energy-free H¹ seminorm.
pub fn h_norm(v: &FeFunction) -> f64 {
    norm_h(v, NormKind::Seminorm)
}

/// `‖a − b‖_H` on the union mesh.
pub fn h_distance(a: &FeFunction, b: &FeFunction) -> Result<f64, MlmcError> {
    Ok(h_norm(&a.add_scaled(b, -1.0)?))
}

/// Unbiased sample variance `(1/(M−1)) Σ ‖v_i − mean‖²_H`.
pub fn variance_estimate(results: &[FeFunction], mean: &FeFunction) -> Result<f64, MlmcError> {
    if results.len() < 2 {
        return Err(MlmcError::Invalid(format!("variance needs at least 2 samples, got {}", results.len())));
    }
    let mut s = 0.0;
    for v in results {
        s += h_distance(v, mean)?.powi(2);
    }
    Ok(s / (results.len() - 1) as f64)
}

/// Running moments of the level differences `ũ_l − ũ_{l−1}`.
#[derive(Debug, Clone)]
pub struct LevelStats {
    pub level: usize,
    sum: Option<FeFunction>,
    sum_sq: f64,
    /// `N_{l,i}` per sample, in sample order.
    pub costs: Vec<usize>,
    /// Unknowns of the coarse member (empty on level 1).
    pub coarse_costs: Vec<usize>,
    /// Refinement steps `k_l(ω_i)`.
    pub steps: Vec<usize>,
    /// Last sample count requested by the allocator (before the never-discard rule).
    pub allocated: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelSummary {
    pub level: usize,
    pub samples: usize,
    pub allocated: usize,
    pub variance: f64,
    pub avg_cost: f64,
    pub max_cost: usize,
    pub avg_coarse_cost: Option<f64>,
    pub avg_steps: f64,
    pub mean_norm: f64,
    pub union_vertices: usize,
}

impl LevelStats {
    pub fn new(level: usize) -> Self {
        Self { level, sum: None, sum_sq: 0.0, costs: Vec::new(), coarse_costs: Vec::new(), steps: Vec::new(), allocated: 0 }
    }

    pub fn samples(&self) -> usize {
        self.costs.len()
    }

    /// Adds a batch of results; the union mesh is folded once per batch.
    pub fn add_batch(&mut self, batch: &[PathwiseResult]) -> Result<(), MlmcError> {
        if batch.is_empty() {
            return Ok(());
        }
        let diffs = batch.iter().map(PathwiseResult::difference).collect::<Result<Vec<_>, _>>()?;
        let mut parts: Vec<&FeFunction> = diffs.iter().collect();
        if let Some(s) = &self.sum {
            parts.push(s);
        }
        self.sum = Some(sum_on_union(&parts)?);
        for (r, d) in batch.iter().zip(&diffs) {
            if r.level != self.level {
                return Err(MlmcError::Invalid(format!("level {} result added to level {}", r.level, self.level)));
            }
            self.sum_sq += h_norm(d).powi(2);
            self.costs.push(r.cost());
            self.steps.push(r.fine.steps);
            if let Some(c) = r.coarse_cost() {
                self.coarse_costs.push(c);
            }
        }
        Ok(())
    }

    /// Pairwise merge of two disjoint sample sets of the same level.
    pub fn merge(&mut self, other: &LevelStats) -> Result<(), MlmcError> {
        self.sum = match (&self.sum, &other.sum) {
            (Some(a), Some(b)) => Some(sum_on_union(&[a, b])?),
            (a, b) => a.clone().or_else(|| b.clone()),
        };
        self.sum_sq += other.sum_sq;
        self.costs.extend_from_slice(&other.costs);
        self.coarse_costs.extend_from_slice(&other.coarse_costs);
        self.steps.extend_from_slice(&other.steps);
        self.allocated = self.allocated.max(other.allocated);
        Ok(())
    }

    /// `E_{M_l}[ũ_l − ũ_{l−1}]` on the level's union mesh.
    pub fn mean(&self) -> Option<FeFunction> {
        self.sum.as_ref().map(|s| {
            let mut m = s.clone();
            m.scale(1.0 / self.samples() as f64);
            m
        })
    }

    pub fn union_mesh(&self) -> Option<&Arc<Mesh>> {
        self.sum.as_ref().map(FeFunction::mesh)
    }

    /// `V̂_l` from the moment sums; 0 with fewer than two samples.
    pub fn variance(&self) -> f64 {
        let m = self.samples();
        if m < 2 {
            return 0.0;
        }
        let mean_sq = self.mean().map_or(0.0, |f| h_norm(&f).powi(2));
        ((self.sum_sq - m as f64 * mean_sq) / (m - 1) as f64).max(0.0)
    }

    pub fn cost_sum(&self) -> u64 {
        self.costs.iter().map(|&c| c as u64).sum()
    }

    /// `C̄_l`, the average cost of all realizations.
    pub fn avg_cost(&self) -> f64 {
        if self.costs.is_empty() {
            return 0.0;
        }
        self.cost_sum() as f64 / self.samples() as f64
    }

    pub fn summary(&self) -> LevelSummary {
        let avg = |v: &[usize]| v.iter().sum::<usize>() as f64 / v.len().max(1) as f64;
        LevelSummary {
            level: self.level,
            samples: self.samples(),
            allocated: self.allocated,
            variance: self.variance(),
            avg_cost: self.avg_cost(),
            max_cost: self.costs.iter().copied().max().unwrap_or(0),
            avg_coarse_cost: (!self.coarse_costs.is_empty()).then(|| avg(&self.coarse_costs)),
            avg_steps: avg(&self.steps),
            mean_norm: self.mean().map_or(0.0, |m| h_norm(&m)),
            union_vertices: self.union_mesh().map_or(0, |m| m.num_vertices()),
        }
    }
}
