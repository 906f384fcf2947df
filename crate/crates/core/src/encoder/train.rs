use super::EncoderModel;
use crate::error::{Error, Result};
use crate::ffd::FfdTemplate;
use crate::fit::{adam_step, AdamParams, AdamState};
use crate::geom::Vec3;
use crate::losses::{ChamferTarget, LossWeights};
use crate::mesh::{Mesh, PointSet};
use crate::projection::ProjectionImage;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Per-sample gradients are summed in groups of this size, always in index
/// order, so results do not depend on the thread count.
const REDUCE_GROUP: usize = 8;

/// Where the translation head is pulled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TranslationTarget {
    /// Each sample's own bounding-box centres.
    #[default]
    PerSample,
    /// Mean centres over the training set.
    GlobalMean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub steps: usize,
    pub adam: AdamParams,
    pub batch_size: usize,
    pub weights: LossWeights,
    pub translation: TranslationTarget,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            steps: 5000,
            adam: AdamParams {
                lr: 1e-3,
                ..AdamParams::default()
            },
            batch_size: 32,
            weights: LossWeights::default(),
            translation: TranslationTarget::PerSample,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 || self.batch_size == 0 {
            return Err(Error::InvalidInput("steps and batch size must be positive".into()));
        }
        if !(self.adam.lr > 0.0 && self.adam.lr.is_finite()) {
            return Err(Error::InvalidInput(format!("learning rate must be positive, got {}", self.adam.lr)));
        }
        if self.weights.lambda1 < 0.0 || self.weights.lambda2 < 0.0 {
            return Err(Error::InvalidInput("loss weights must be non-negative".into()));
        }
        Ok(())
    }
}

/// One preprocessed image with its origin-centred ground truth.
#[derive(Debug, Clone)]
pub struct TrainingExample {
    pub input: Vec<f64>,
    pub target_left: ChamferTarget,
    pub target_right: ChamferTarget,
    pub ctr_l: Vec3,
    pub ctr_r: Vec3,
}

impl TrainingExample {
    pub fn from_points(input: Vec<f64>, gt_left: PointSet, gt_right: PointSet, ctr_l: Vec3, ctr_r: Vec3) -> Self {
        TrainingExample {
            input,
            target_left: ChamferTarget::new(&gt_left),
            target_right: ChamferTarget::new(&gt_right),
            ctr_l,
            ctr_r,
        }
    }

    /// Targets are the ground-truth vertex sets.
    pub fn from_meshes(model: &EncoderModel, image: &ProjectionImage, gt_left: &Mesh, gt_right: &Mesh, ctr_l: Vec3, ctr_r: Vec3) -> Result<Self> {
        if gt_left.is_empty() || gt_right.is_empty() {
            return Err(Error::InvalidInput("ground-truth mesh has no vertices".into()));
        }
        Ok(TrainingExample::from_points(
            model.preprocess(image)?,
            PointSet::from(gt_left),
            PointSet::from(gt_right),
            ctr_l,
            ctr_r,
        ))
    }
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub model: EncoderModel,
    /// Mean minibatch objective before each update.
    pub loss_trace: Vec<f64>,
}

/// Trailing moving average over `window` entries.
pub fn smoothed(trace: &[f64], window: usize) -> Vec<f64> {
    let w = window.max(1);
    let mut acc = 0.0;
    trace
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            acc += x;
            if i >= w {
                acc -= trace[i - w];
            }
            acc / (i + 1).min(w) as f64
        })
        .collect()
}

/// Minibatch Adam on the full objective. Batches walk seeded epoch
/// permutations of `data`.
pub fn train(
    model: &EncoderModel,
    left: &[FfdTemplate],
    right: &[FfdTemplate],
    data: &[TrainingExample],
    cfg: &TrainConfig,
) -> Result<Trained> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidInput("training set is empty".into()));
    }
    model.check_templates(left, right)?;
    let n = data.len() as f64;
    let mean_ctr = (
        data.iter().fold(Vec3::zeros(), |a, e| a + e.ctr_l) / n,
        data.iter().fold(Vec3::zeros(), |a, e| a + e.ctr_r) / n,
    );
    let target = |e: &TrainingExample| match cfg.translation {
        TranslationTarget::PerSample => (e.ctr_l, e.ctr_r),
        TranslationTarget::GlobalMean => mean_ctr,
    };

    let mut model = model.clone();
    let mut state = AdamState::new(model.param_count());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = Vec::new();
    let mut trace = Vec::with_capacity(cfg.steps);
    for step in 0..cfg.steps {
        let mut batch = Vec::with_capacity(cfg.batch_size);
        while batch.len() < cfg.batch_size {
            if order.is_empty() {
                order = (0..data.len()).collect();
                order.shuffle(&mut rng);
                order.reverse();
            }
            batch.push(order.pop().expect("refilled"));
        }
        let mut grad = vec![0.0; model.param_count()];
        let mut loss = 0.0;
        for group in batch.chunks(REDUCE_GROUP) {
            let parts = group
                .par_iter()
                .map(|&i| model.loss_and_grad(left, right, &data[i], &cfg.weights, target(&data[i]), true))
                .collect::<Result<Vec<_>>>()?;
            for (_, l, g) in parts {
                loss += l;
                grad.iter_mut().zip(g.expect("requested")).for_each(|(a, b)| *a += b);
            }
        }
        let scale = 1.0 / batch.len() as f64;
        loss *= scale;
        if !loss.is_finite() {
            return Err(Error::Diverged(format!("training loss became {loss} at step {step}")));
        }
        trace.push(loss);
        grad.iter_mut().for_each(|g| *g *= scale);
        adam_step(&mut state, &mut model.params, &grad, &cfg.adam)?;
    }
    Ok(Trained { model, loss_trace: trace })
}
