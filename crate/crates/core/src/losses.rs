//! Reconstruction objective: per-branch softmax-weighted Chamfer terms, the
//! translation term, the weighted displacement regularizer, their weighted
//! total, and analytic gradients of each.
//!
//! Chamfer gradients hold nearest-neighbour correspondences fixed at the
//! current iterate.

use crate::error::{Error, Result};
use crate::ffd::Displacement;
use crate::geom::{dist2, Vec3};
use crate::mesh::PointSet;
use crate::spatial::KdTree;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    /// Translation term weight.
    pub lambda1: f64,
    /// Displacement regularizer weight.
    pub lambda2: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda1: 50.0,
            lambda2: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub deform: f64,
    pub translation: f64,
    pub weight_reg: f64,
}

pub fn total_loss(parts: &LossParts, weights: &LossWeights) -> f64 {
    parts.deform + weights.lambda1 * parts.translation + weights.lambda2 * parts.weight_reg
}

/// Softmax with the maximum subtracted first.
pub fn normalize_weights(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|z| (z - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Per-template outputs for one lung branch, all at the origin.
#[derive(Debug, Clone)]
pub struct BranchCandidates {
    pub deformed: Vec<Vec<Vec3>>,
    pub logits: Vec<f64>,
    pub displacements: Vec<Displacement>,
}

impl BranchCandidates {
    pub fn new(deformed: Vec<Vec<Vec3>>, logits: Vec<f64>, displacements: Vec<Displacement>) -> Result<Self> {
        if deformed.is_empty() {
            return Err(Error::InvalidInput("a branch needs at least one template".into()));
        }
        if logits.len() != deformed.len() || displacements.len() != deformed.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} deformed sets, {} logits, {} displacements",
                deformed.len(),
                logits.len(),
                displacements.len()
            )));
        }
        if deformed.iter().any(Vec::is_empty) {
            return Err(Error::InvalidInput("deformed vertex set is empty".into()));
        }
        if logits.iter().any(|z| !z.is_finite()) {
            return Err(Error::InvalidInput("weight logits must be finite".into()));
        }
        Ok(BranchCandidates {
            deformed,
            logits,
            displacements,
        })
    }

    pub fn len(&self) -> usize {
        self.deformed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deformed.is_empty()
    }

    pub fn weights(&self) -> Vec<f64> {
        normalize_weights(&self.logits)
    }

    pub fn selected(&self) -> usize {
        argmax(&self.logits)
    }
}

/// Ground-truth points with their search tree, reused across evaluations.
#[derive(Debug, Clone)]
pub struct ChamferTarget {
    points: Vec<Vec3>,
    tree: KdTree,
}

impl ChamferTarget {
    pub fn new(target: &PointSet) -> Self {
        ChamferTarget {
            points: target.points().to_vec(),
            tree: KdTree::new(target.points()),
        }
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }
}

/// Chamfer value (squared distances, summed both ways) and its gradient with
/// respect to `pred`. Summation order matches [`crate::metrics::chamfer`].
pub fn chamfer_and_grad(pred: &[Vec3], target: &ChamferTarget) -> (f64, Vec<Vec3>) {
    let pred_tree = KdTree::new(pred);
    let fwd: Vec<(f64, usize)> = pred
        .par_iter()
        .map(|p| target.tree.nearest(p).expect("target is non-empty"))
        .collect();
    let bwd: Vec<(f64, usize)> = target
        .points
        .par_iter()
        .map(|q| pred_tree.nearest(q).expect("pred is non-empty"))
        .collect();
    let mut grad: Vec<Vec3> = pred
        .iter()
        .zip(&fwd)
        .map(|(p, &(_, j))| (p - target.points[j]) * 2.0)
        .collect();
    for (q, &(_, i)) in target.points.iter().zip(&bwd) {
        grad[i] += (pred[i] - q) * 2.0;
    }
    let a: f64 = fwd.iter().map(|f| f.0).sum();
    let b: f64 = bwd.iter().map(|b| b.0).sum();
    (a + b, grad)
}

/// Gradient of the Chamfer distance with respect to each point of `pred`.
pub fn chamfer_grad(pred: &PointSet, target: &PointSet) -> Vec<Vec3> {
    chamfer_and_grad(pred.points(), &ChamferTarget::new(target)).1
}

/// Per-branch term `Σ w_i (C_i + lambda2 ‖ΔP_i‖²)` and its gradients.
#[derive(Debug, Clone)]
pub struct BranchGrad {
    pub chamfer: Vec<f64>,
    pub deform: f64,
    pub weight_reg: f64,
    /// ∂/∂V′ of the weighted objective, per template.
    pub d_deformed: Vec<Vec<Vec3>>,
    /// Direct ∂/∂ΔP from the regularizer, per template.
    pub d_delta: Vec<Vec<Vec3>>,
    pub d_logits: Vec<f64>,
}

pub fn branch_loss_and_grad(cands: &BranchCandidates, target: &ChamferTarget, lambda2: f64) -> BranchGrad {
    let w = cands.weights();
    let per: Vec<(f64, Vec<Vec3>)> = cands
        .deformed
        .par_iter()
        .map(|v| chamfer_and_grad(v, target))
        .collect();
    let chamfer: Vec<f64> = per.iter().map(|c| c.0).collect();
    let reg: Vec<f64> = cands.displacements.iter().map(Displacement::norm_squared).collect();
    let deform: f64 = w.iter().zip(&chamfer).map(|(w, c)| w * c).sum();
    let weight_reg: f64 = w.iter().zip(&reg).map(|(w, r)| w * r).sum();
    // Softmax Jacobian: ∂(Σ w_i c_i)/∂z_j = w_j (c_j − Σ w_i c_i).
    let cost: Vec<f64> = chamfer.iter().zip(&reg).map(|(c, r)| c + lambda2 * r).collect();
    let mean: f64 = w.iter().zip(&cost).map(|(w, c)| w * c).sum();
    let d_logits = w.iter().zip(&cost).map(|(w, c)| w * (c - mean)).collect();
    let d_deformed = per
        .into_iter()
        .zip(&w)
        .map(|((_, g), wi)| g.into_iter().map(|x| x * *wi).collect())
        .collect();
    let d_delta = cands
        .displacements
        .iter()
        .zip(&w)
        .map(|(d, wi)| d.delta.iter().map(|x| x * (2.0 * lambda2 * wi)).collect())
        .collect();
    BranchGrad {
        chamfer,
        deform,
        weight_reg,
        d_deformed,
        d_delta,
        d_logits,
    }
}

fn weighted_chamfer(cands: &BranchCandidates, gt: &PointSet) -> f64 {
    let target = ChamferTarget::new(gt);
    let w = cands.weights();
    cands
        .deformed
        .iter()
        .zip(&w)
        .map(|(v, w)| w * chamfer_and_grad(v, &target).0)
        .sum()
}

pub fn deform_loss(left: &BranchCandidates, right: &BranchCandidates, gt_left: &PointSet, gt_right: &PointSet) -> f64 {
    weighted_chamfer(left, gt_left) + weighted_chamfer(right, gt_right)
}

pub fn translation_loss(tl: &Vec3, tr: &Vec3, ctr_l: &Vec3, ctr_r: &Vec3) -> f64 {
    dist2(tl, ctr_l) + dist2(tr, ctr_r)
}

/// `(∂/∂Tl, ∂/∂Tr)` of [`translation_loss`].
pub fn translation_grad(tl: &Vec3, tr: &Vec3, ctr_l: &Vec3, ctr_r: &Vec3) -> (Vec3, Vec3) {
    ((tl - ctr_l) * 2.0, (tr - ctr_r) * 2.0)
}

pub fn weight_reg_loss(left: &BranchCandidates, right: &BranchCandidates) -> f64 {
    let side = |b: &BranchCandidates| -> f64 {
        b.weights()
            .iter()
            .zip(&b.displacements)
            .map(|(w, d)| w * d.norm_squared())
            .sum()
    };
    side(left) + side(right)
}
