//! Direct geometric fitting: recovers per-template lattice displacements,
//! selection weights and branch translations from target geometry, then
//! assembles the two-lung prediction from the selected templates.

mod adam;

pub use crate::losses::chamfer_grad;
pub use adam::{adam_step, AdamParams, AdamState};

use crate::error::{Error, Result};
use crate::ffd::{grad_wrt_delta, Displacement, FfdTemplate};
use crate::geom::Vec3;
use crate::losses::{argmax, chamfer_and_grad, normalize_weights, total_loss, ChamferTarget, LossParts, LossWeights};
use crate::mesh::{sample_surface, Mesh, PointSet};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub steps: usize,
    pub adam: AdamParams,
    pub weights: LossWeights,
    pub target_sample_count: usize,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            steps: 500,
            adam: AdamParams::default(),
            weights: LossWeights::default(),
            target_sample_count: 1024,
            seed: 0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.adam.lr > 0.0 && self.adam.lr.is_finite()) {
            return Err(Error::InvalidInput(format!("step size must be positive, got {}", self.adam.lr)));
        }
        if self.target_sample_count == 0 {
            return Err(Error::InvalidInput("target sample count must be positive".into()));
        }
        if self.weights.lambda1 < 0.0 || self.weights.lambda2 < 0.0 {
            return Err(Error::InvalidInput("loss weights must be non-negative".into()));
        }
        Ok(())
    }
}

/// Result of fitting one template.
#[derive(Debug, Clone)]
pub struct TemplateFit {
    /// Best iterate found.
    pub delta: Displacement,
    /// Chamfer distance at the best iterate.
    pub chamfer: f64,
    /// Objective `C + lambda2 ‖ΔP‖²` at every evaluated iterate, starting at ΔP = 0.
    pub trace: Vec<f64>,
}

impl TemplateFit {
    /// Running minimum of the trace.
    pub fn best_so_far(&self) -> Vec<f64> {
        self.trace
            .iter()
            .scan(f64::INFINITY, |b, &x| {
                *b = b.min(x);
                Some(*b)
            })
            .collect()
    }
}

/// Adam minimization of `C(V′, target) + lambda2 ‖ΔP‖²` from ΔP = 0.
pub fn fit_single_template(template: &FfdTemplate, target: &PointSet, cfg: &FitConfig) -> Result<TemplateFit> {
    cfg.validate()?;
    let target = ChamferTarget::new(target);
    let l = template.lattice_size();
    let lambda2 = cfg.weights.lambda2;
    let mut params = vec![0.0; 3 * l];
    let mut state = AdamState::new(3 * l);
    let mut trace = Vec::with_capacity(cfg.steps + 1);
    let mut best: Option<(f64, Vec<f64>, f64)> = None;
    for step in 0..=cfg.steps {
        let delta = Displacement::from_flat(&params)?;
        let verts = template.deform_vertices(&delta)?;
        let (c, g) = chamfer_and_grad(&verts, &target);
        let loss = c + lambda2 * delta.norm_squared();
        if !loss.is_finite() {
            return Err(Error::Diverged(format!("objective became {loss} at step {step}")));
        }
        trace.push(loss);
        if best.as_ref().is_none_or(|b| loss < b.0) {
            best = Some((loss, params.clone(), c));
        }
        if step == cfg.steps {
            break;
        }
        let gd = grad_wrt_delta(&template.basis, &g)?;
        let grads: Vec<f64> = gd
            .iter()
            .zip(&delta.delta)
            .flat_map(|(g, d)| {
                let t = g + d * (2.0 * lambda2);
                [t.x, t.y, t.z]
            })
            .collect();
        adam_step(&mut state, &mut params, &grads, &cfg.adam)?;
    }
    let (_, p, chamfer) = best.expect("at least one evaluation");
    Ok(TemplateFit {
        delta: Displacement::from_flat(&p)?,
        chamfer,
        trace,
    })
}

/// Target geometry for a two-lung fit, in world coordinates.
#[derive(Debug, Clone)]
pub enum PairTarget {
    Mesh(Mesh),
    Points(PointSet),
}

/// Left (larger mean x) and right parts of a target, not yet centred.
#[derive(Debug, Clone)]
pub enum SplitTarget {
    Meshes(Mesh, Mesh),
    Points(PointSet, PointSet),
}

fn mean_x(points: &[Vec3]) -> f64 {
    points.iter().map(|p| p.x).sum::<f64>() / points.len() as f64
}

/// Mesh targets split by connected components, grouped by which side of the
/// overall bounding-box centre their mean x falls on. Point targets split by
/// the sign of x after centring.
pub fn split_target(target: &PairTarget) -> Result<SplitTarget> {
    match target {
        PairTarget::Mesh(mesh) => {
            let comps = mesh.connected_components();
            if comps.len() < 2 {
                return Err(Error::InvalidInput(format!(
                    "target mesh has {} connected component(s); two lungs are needed",
                    comps.len()
                )));
            }
            let cx = mesh.bounding_box()?.center().x;
            let (l, r): (Vec<&Mesh>, Vec<&Mesh>) = comps.iter().partition(|c| mean_x(c.vertices()) > cx);
            if l.is_empty() || r.is_empty() {
                return Err(Error::InvalidInput("target components all lie on one side".into()));
            }
            Ok(SplitTarget::Meshes(Mesh::merge(&l), Mesh::merge(&r)))
        }
        PairTarget::Points(ps) => {
            let cx = ps.bounding_box().center().x;
            let (l, r): (Vec<Vec3>, Vec<Vec3>) = ps.points().iter().partition(|p| p.x > cx);
            if l.is_empty() || r.is_empty() {
                return Err(Error::InvalidInput("target points do not separate along x".into()));
            }
            Ok(SplitTarget::Points(PointSet::new(l)?, PointSet::new(r)?))
        }
    }
}

/// Fit outcome for one branch.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BranchFit {
    pub selected: usize,
    pub weights: Vec<f64>,
    pub chamfer: Vec<f64>,
    /// Flattened displacement per template.
    pub displacements: Vec<Vec<f64>>,
    /// Objective trace of the selected template.
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct PairFit {
    pub left: BranchFit,
    pub right: BranchFit,
    pub translation_left: Vec3,
    pub translation_right: Vec3,
    pub loss: LossParts,
    pub total_loss: f64,
    /// Selected deformed templates, translated, left then right.
    pub mesh: Mesh,
    pub left_mesh: Mesh,
    pub right_mesh: Mesh,
}

impl PairFit {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "left": self.left,
            "right": self.right,
            "translation_left": [self.translation_left.x, self.translation_left.y, self.translation_left.z],
            "translation_right": [self.translation_right.x, self.translation_right.y, self.translation_right.z],
            "loss": self.loss,
            "total_loss": self.total_loss,
            "vertex_count": self.mesh.vertex_count(),
            "face_count": self.mesh.face_count(),
        })
    }
}

/// Centred component and its bounding-box centre.
fn align(part: Either<'_>, cfg: &FitConfig, stream: u64) -> Result<(PointSet, Vec3)> {
    match part {
        Either::Mesh(m) => {
            let c = m.bounding_box()?.center();
            let pts = sample_surface(&m.translate(&-c), cfg.target_sample_count, cfg.seed.wrapping_add(stream))?;
            Ok((pts, c))
        }
        Either::Points(p) => {
            let c = p.bounding_box().center();
            Ok((p.translate(&-c), c))
        }
    }
}

enum Either<'a> {
    Mesh(&'a Mesh),
    Points(&'a PointSet),
}

fn fit_branch(templates: &[FfdTemplate], target: &PointSet, cfg: &FitConfig) -> Result<(BranchFit, Vec<Displacement>)> {
    if templates.is_empty() {
        return Err(Error::InvalidInput("each branch needs at least one template".into()));
    }
    let fits = templates
        .par_iter()
        .map(|t| fit_single_template(t, target, cfg))
        .collect::<Result<Vec<_>>>()?;
    let chamfer: Vec<f64> = fits.iter().map(|f| f.chamfer).collect();
    let neg: Vec<f64> = chamfer.iter().map(|c| -c).collect();
    let weights = normalize_weights(&neg);
    let selected = argmax(&weights);
    let branch = BranchFit {
        selected,
        weights,
        chamfer,
        displacements: fits.iter().map(|f| f.delta.to_flat()).collect(),
        trace: fits[selected].trace.clone(),
    };
    Ok((branch, fits.into_iter().map(|f| f.delta).collect()))
}

/// Fits every template of each branch to the matching centred target part,
/// weights templates by `softmax(−chamfer)`, and places the best one of each
/// branch at its part's bounding-box centre.
pub fn fit_organ_pair(
    templates_left: &[FfdTemplate],
    templates_right: &[FfdTemplate],
    target: &PairTarget,
    cfg: &FitConfig,
) -> Result<PairFit> {
    cfg.validate()?;
    let split = split_target(target)?;
    let ((gl, cl), (gr, cr)) = match &split {
        SplitTarget::Meshes(l, r) => (align(Either::Mesh(l), cfg, 0)?, align(Either::Mesh(r), cfg, 1)?),
        SplitTarget::Points(l, r) => (align(Either::Points(l), cfg, 0)?, align(Either::Points(r), cfg, 1)?),
    };
    let (left, dl) = fit_branch(templates_left, &gl, cfg)?;
    let (right, dr) = fit_branch(templates_right, &gr, cfg)?;
    let left_mesh = templates_left[left.selected].deform(&dl[left.selected])?.translate(&cl);
    let right_mesh = templates_right[right.selected].deform(&dr[right.selected])?.translate(&cr);
    let side = |b: &BranchFit, d: &[Displacement]| -> (f64, f64) {
        let deform = b.weights.iter().zip(&b.chamfer).map(|(w, c)| w * c).sum();
        let reg = b.weights.iter().zip(d).map(|(w, d)| w * d.norm_squared()).sum();
        (deform, reg)
    };
    let (dfl, rgl) = side(&left, &dl);
    let (dfr, rgr) = side(&right, &dr);
    let loss = LossParts {
        deform: dfl + dfr,
        translation: 0.0,
        weight_reg: rgl + rgr,
    };
    Ok(PairFit {
        mesh: Mesh::merge(&[&left_mesh, &right_mesh]),
        left,
        right,
        translation_left: cl,
        translation_right: cr,
        total_loss: total_loss(&loss, &cfg.weights),
        loss,
        left_mesh,
        right_mesh,
    })
}
