//! Shape similarity between a reconstruction and its ground truth: Chamfer
//! distance, earth mover's distance, point and surface Hausdorff distances,
//! F-score and volumetric IoU.
//!
//! Chamfer sums squared nearest-neighbour distances in both directions; EMD
//! sums Euclidean distances of the optimal one-to-one matching. Neither is
//! normalized by point count, so reports always carry the sample counts.

mod emd;
mod voxel;

pub use emd::{emd, min_cost_assignment};
pub use voxel::{iou, mesh_iou, voxelize, voxelize_on_grid, OccupancyGrid, DEFAULT_IOU_RESOLUTION, IOU_BOUNDS_INFLATION};

use crate::error::{Error, Result};
use crate::mesh::{sample_surface, Mesh, PointSet};
use crate::registry::Registry;
use crate::spatial::{KdTree, TriangleBvh};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::{Arc, OnceLock};

/// F-score threshold in normalized model units.
pub const DEFAULT_EPS: f64 = 0.001;

/// Squared distance from each query point to its nearest neighbour in `tree`,
/// in query order.
fn nearest_d2(tree: &KdTree, queries: &[crate::Vec3]) -> Vec<f64> {
    queries
        .par_iter()
        .map(|q| tree.nearest(q).expect("tree is non-empty").0)
        .collect()
}

pub fn chamfer(p: &PointSet, q: &PointSet) -> f64 {
    let (tp, tq) = (KdTree::new(p.points()), KdTree::new(q.points()));
    let pq: f64 = nearest_d2(&tq, p.points()).iter().sum();
    let qp: f64 = nearest_d2(&tp, q.points()).iter().sum();
    pq + qp
}

pub fn hausdorff_point(p: &PointSet, q: &PointSet) -> f64 {
    let (tp, tq) = (KdTree::new(p.points()), KdTree::new(q.points()));
    let m = |v: Vec<f64>| v.into_iter().fold(0.0, f64::max);
    m(nearest_d2(&tq, p.points())).max(m(nearest_d2(&tp, q.points()))).sqrt()
}

/// Largest exact point-to-surface distance from `n_samples` area-uniform
/// samples of `from` to the triangles of `to`.
pub fn directed_hausdorff_mesh(from: &Mesh, to: &Mesh, n_samples: usize, seed: u64) -> Result<f64> {
    if to.face_count() == 0 {
        return Err(Error::Degenerate("target mesh has no faces".into()));
    }
    let samples = sample_surface(from, n_samples, seed)?;
    let bvh = TriangleBvh::new(to.triangles());
    let worst = samples
        .points()
        .par_iter()
        .map(|p| bvh.nearest_dist2(p))
        .reduce(|| 0.0, f64::max);
    Ok(worst.sqrt())
}

/// Symmetric surface Hausdorff distance; direction `a → b` uses `seed`,
/// `b → a` uses `seed + 1`.
pub fn hausdorff_mesh(a: &Mesh, b: &Mesh, n_samples: usize, seed: u64) -> Result<f64> {
    Ok(directed_hausdorff_mesh(a, b, n_samples, seed)?.max(directed_hausdorff_mesh(b, a, n_samples, seed.wrapping_add(1))?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FScore {
    pub precision: f64,
    pub recall: f64,
    pub f: f64,
}

/// Precision: share of `p` within `eps` of `q`. Recall: share of `q` within
/// `eps` of `p`. `f` is their harmonic mean, 0 when both vanish.
pub fn f_score(p: &PointSet, q: &PointSet, eps: f64) -> Result<FScore> {
    if !(eps > 0.0) {
        return Err(Error::InvalidInput(format!("F-score threshold must be positive, got {eps}")));
    }
    let (tp, tq) = (KdTree::new(p.points()), KdTree::new(q.points()));
    let share = |d2: Vec<f64>| d2.iter().filter(|&&d| d <= eps * eps).count() as f64 / d2.len() as f64;
    let precision = share(nearest_d2(&tq, p.points()));
    let recall = share(nearest_d2(&tp, q.points()));
    let f = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(FScore { precision, recall, f })
}

/// Sampling and threshold settings; recorded verbatim in every report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub n_points: usize,
    pub hausdorff_mesh_samples: usize,
    pub eps: f64,
    pub iou_resolution: usize,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            n_points: 1024,
            hausdorff_mesh_samples: 10_000,
            eps: DEFAULT_EPS,
            iou_resolution: DEFAULT_IOU_RESOLUTION,
            seed: 0,
        }
    }
}

/// Metric values for one predicted/ground-truth pair. Metrics that were not
/// requested stay `None` (JSON `null`).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub chamfer: Option<f64>,
    pub emd: Option<f64>,
    pub hausdorff_point: Option<f64>,
    pub hausdorff_mesh: Option<f64>,
    pub f_score_eps: Option<f64>,
    pub f_score_1_5eps: Option<f64>,
    pub precision_eps: Option<f64>,
    pub recall_eps: Option<f64>,
    pub precision_1_5eps: Option<f64>,
    pub recall_1_5eps: Option<f64>,
    pub iou: Option<f64>,
    pub config: Option<EvalConfig>,
}

impl MetricsReport {
    pub const FIELDS: [&'static str; 11] = [
        "chamfer",
        "emd",
        "hausdorff_point",
        "hausdorff_mesh",
        "f_score_eps",
        "f_score_1_5eps",
        "precision_eps",
        "recall_eps",
        "precision_1_5eps",
        "recall_1_5eps",
        "iou",
    ];

    /// Values in [`Self::FIELDS`] order.
    pub fn values(&self) -> [Option<f64>; 11] {
        [
            self.chamfer,
            self.emd,
            self.hausdorff_point,
            self.hausdorff_mesh,
            self.f_score_eps,
            self.f_score_1_5eps,
            self.precision_eps,
            self.recall_eps,
            self.precision_1_5eps,
            self.recall_1_5eps,
            self.iou,
        ]
    }
}

/// Everything a metric may look at for one pair.
pub struct MetricInput<'a> {
    pub pred: &'a Mesh,
    pub gt: &'a Mesh,
    pub pred_points: &'a PointSet,
    pub gt_points: &'a PointSet,
    pub config: &'a EvalConfig,
}

pub trait Metric: Send + Sync {
    fn name(&self) -> &'static str;

    /// Computes the metric and stores it in its report field(s).
    fn record(&self, input: &MetricInput<'_>, report: &mut MetricsReport) -> Result<()>;
}

struct Chamfer;
struct Emd;
struct HausdorffPoint;
struct HausdorffMesh;
struct FScoreMetric;
struct Iou;

impl Metric for Chamfer {
    fn name(&self) -> &'static str {
        "chamfer"
    }
    fn record(&self, i: &MetricInput<'_>, r: &mut MetricsReport) -> Result<()> {
        r.chamfer = Some(chamfer(i.pred_points, i.gt_points));
        Ok(())
    }
}

impl Metric for Emd {
    fn name(&self) -> &'static str {
        "emd"
    }
    fn record(&self, i: &MetricInput<'_>, r: &mut MetricsReport) -> Result<()> {
        r.emd = Some(emd(i.pred_points, i.gt_points)?);
        Ok(())
    }
}

impl Metric for HausdorffPoint {
    fn name(&self) -> &'static str {
        "hausdorff_point"
    }
    fn record(&self, i: &MetricInput<'_>, r: &mut MetricsReport) -> Result<()> {
        r.hausdorff_point = Some(hausdorff_point(i.pred_points, i.gt_points));
        Ok(())
    }
}

impl Metric for HausdorffMesh {
    fn name(&self) -> &'static str {
        "hausdorff_mesh"
    }
    fn record(&self, i: &MetricInput<'_>, r: &mut MetricsReport) -> Result<()> {
        let c = i.config;
        r.hausdorff_mesh = Some(hausdorff_mesh(i.pred, i.gt, c.hausdorff_mesh_samples, c.seed.wrapping_add(2))?);
        Ok(())
    }
}

impl Metric for FScoreMetric {
    fn name(&self) -> &'static str {
        "f_score"
    }
    fn record(&self, i: &MetricInput<'_>, r: &mut MetricsReport) -> Result<()> {
        let a = f_score(i.pred_points, i.gt_points, i.config.eps)?;
        let b = f_score(i.pred_points, i.gt_points, 1.5 * i.config.eps)?;
        r.f_score_eps = Some(a.f);
        r.precision_eps = Some(a.precision);
        r.recall_eps = Some(a.recall);
        r.f_score_1_5eps = Some(b.f);
        r.precision_1_5eps = Some(b.precision);
        r.recall_1_5eps = Some(b.recall);
        Ok(())
    }
}

impl Metric for Iou {
    fn name(&self) -> &'static str {
        "iou"
    }
    fn record(&self, i: &MetricInput<'_>, r: &mut MetricsReport) -> Result<()> {
        r.iou = Some(mesh_iou(i.pred, i.gt, i.config.iou_resolution)?);
        Ok(())
    }
}

/// Evaluation metrics by name: `chamfer`, `emd`, `f_score`,
/// `hausdorff_mesh`, `hausdorff_point`, `iou`.
pub fn metrics() -> &'static Registry<dyn Metric> {
    static REG: OnceLock<Registry<dyn Metric>> = OnceLock::new();
    REG.get_or_init(|| {
        let mut r: Registry<dyn Metric> = Registry::new("metric");
        let all: [Arc<dyn Metric>; 6] = [
            Arc::new(Chamfer),
            Arc::new(Emd),
            Arc::new(HausdorffPoint),
            Arc::new(HausdorffMesh),
            Arc::new(FScoreMetric),
            Arc::new(Iou),
        ];
        for m in all {
            r.register(m.name(), m);
        }
        r
    })
}

/// Runs the named metrics (all registered ones when `names` is empty).
/// Point metrics use `n_points` surface samples per mesh, both drawn with
/// `seed`, so a mesh compared with itself scores exactly zero distance.
pub fn evaluate(pred: &Mesh, gt: &Mesh, config: &EvalConfig, names: &[&str]) -> Result<MetricsReport> {
    let chosen: Vec<Arc<dyn Metric>> = if names.is_empty() {
        metrics().iter().map(|(_, m)| m.clone()).collect()
    } else {
        names.iter().map(|n| metrics().get(n)).collect::<Result<_>>()?
    };
    let pred_points = sample_surface(pred, config.n_points, config.seed)?;
    let gt_points = sample_surface(gt, config.n_points, config.seed)?;
    let input = MetricInput {
        pred,
        gt,
        pred_points: &pred_points,
        gt_points: &gt_points,
        config,
    };
    let mut report = MetricsReport {
        config: Some(*config),
        ..MetricsReport::default()
    };
    for m in chosen {
        m.record(&input, &mut report)?;
    }
    Ok(report)
}
