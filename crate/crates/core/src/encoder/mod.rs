//! Toy image encoder with the template-deformation decoder heads.
//!
//! The image is histogram-equalized, average-pooled and passed through
//! fully-connected ReLU layers to a descriptor. Each template of each branch
//! has its own linear head of width `3L + 1` (lattice displacement plus one
//! selection logit); a separate linear head emits both branch translations.
//! Encoder weights start Glorot-uniform, all biases and every head start at
//! zero, so an untrained model predicts the undeformed templates at the
//! origin.
//!
//! Parameters live in one flat array. Dense blocks store `W` row-major
//! (`outputs × inputs`) followed by the bias.

mod checkpoint;
mod train;

pub use checkpoint::{load_model, save_model, sidecar_path};
pub use train::{smoothed, train, TrainConfig, Trained, TrainingExample, TranslationTarget};

use crate::error::{Error, Result};
use crate::ffd::{grad_wrt_delta, Displacement, FfdTemplate};
use crate::geom::Vec3;
use crate::losses::{argmax, branch_loss_and_grad, normalize_weights, translation_grad, translation_loss, BranchCandidates, LossParts, LossWeights};
use crate::projection::{histogram_equalize, ProjectionImage, DETECTOR_COLS, DETECTOR_ROWS};
use crate::reconstruct::{BranchPrediction, ReconstructedPair};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderDims {
    pub image_rows: usize,
    pub image_cols: usize,
    /// Side of the square average-pooling window.
    pub pool: usize,
    /// Widths of the ReLU layers; the last one is the descriptor.
    pub hidden: Vec<usize>,
    /// Control points per template lattice.
    pub lattice_size: usize,
    pub templates_left: usize,
    pub templates_right: usize,
}

impl Default for EncoderDims {
    fn default() -> Self {
        EncoderDims {
            image_rows: DETECTOR_ROWS,
            image_cols: DETECTOR_COLS,
            pool: 4,
            hidden: vec![256, 256, 256],
            lattice_size: 64,
            templates_left: 2,
            templates_right: 2,
        }
    }
}

impl EncoderDims {
    pub fn validate(&self) -> Result<()> {
        if self.pool == 0 || !self.image_rows.is_multiple_of(self.pool) || !self.image_cols.is_multiple_of(self.pool) || self.image_rows == 0 || self.image_cols == 0 {
            return Err(Error::InvalidInput(format!(
                "image {}x{} is not divisible into {}-pixel pooling windows",
                self.image_rows, self.image_cols, self.pool
            )));
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::InvalidInput("encoder needs at least one non-empty hidden layer".into()));
        }
        if self.lattice_size == 0 || self.templates_left == 0 || self.templates_right == 0 {
            return Err(Error::InvalidInput("each branch needs a lattice and at least one template".into()));
        }
        Ok(())
    }

    pub fn input_len(&self) -> usize {
        (self.image_rows / self.pool) * (self.image_cols / self.pool)
    }

    pub fn descriptor_width(&self) -> usize {
        *self.hidden.last().expect("validated")
    }

    /// `3L` displacements plus one selection logit.
    pub fn head_width(&self) -> usize {
        3 * self.lattice_size + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Dense {
    offset: usize,
    inputs: usize,
    outputs: usize,
}

impl Dense {
    fn bias(&self) -> usize {
        self.offset + self.inputs * self.outputs
    }

    fn len(&self) -> usize {
        (self.inputs + 1) * self.outputs
    }

    fn forward(&self, params: &[f64], x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        let b = &params[self.bias()..self.bias() + self.outputs];
        for (o, bias) in b.iter().enumerate() {
            let w = &params[self.offset + o * self.inputs..][..self.inputs];
            out.push(bias + w.iter().zip(x).map(|(w, x)| w * x).sum::<f64>());
        }
    }

    /// Accumulates parameter gradients into `grad` and returns `∂/∂x`.
    fn backward(&self, params: &[f64], x: &[f64], dy: &[f64], grad: &mut [f64], need_dx: bool) -> Vec<f64> {
        let mut dx = if need_dx { vec![0.0; self.inputs] } else { Vec::new() };
        for (o, &d) in dy.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            grad[self.bias() + o] += d;
            let row = self.offset + o * self.inputs;
            for (g, xi) in grad[row..row + self.inputs].iter_mut().zip(x) {
                *g += d * xi;
            }
            if need_dx {
                for (a, w) in dx.iter_mut().zip(&params[row..row + self.inputs]) {
                    *a += d * w;
                }
            }
        }
        dx
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Layout {
    encoder: Vec<Dense>,
    left: Vec<Dense>,
    right: Vec<Dense>,
    translation: Dense,
    len: usize,
}

impl Layout {
    fn new(dims: &EncoderDims) -> Self {
        let mut offset = 0;
        let mut next = |inputs: usize, outputs: usize| {
            let d = Dense { offset, inputs, outputs };
            offset += d.len();
            d
        };
        let mut width = dims.input_len();
        let mut encoder = Vec::new();
        for &h in &dims.hidden {
            encoder.push(next(width, h));
            width = h;
        }
        let left = (0..dims.templates_left).map(|_| next(width, dims.head_width())).collect();
        let right = (0..dims.templates_right).map(|_| next(width, dims.head_width())).collect();
        let translation = next(width, 6);
        Layout {
            encoder,
            left,
            right,
            translation,
            len: offset,
        }
    }

    #[cfg(test)]
    fn heads(&self) -> impl Iterator<Item = &Dense> {
        self.left.iter().chain(&self.right).chain(std::iter::once(&self.translation))
    }
}

/// Named contiguous slice of the parameter array.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamBlock {
    pub name: String,
    pub offset: usize,
    /// `[outputs, inputs]` of the weight matrix; the bias follows it.
    pub shape: [usize; 2],
}

/// Per-branch head outputs: one displacement and one logit per template.
#[derive(Debug, Clone)]
pub struct BranchHeads {
    pub displacements: Vec<Displacement>,
    pub logits: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct HeadOutputs {
    pub left: BranchHeads,
    pub right: BranchHeads,
    pub translation_left: Vec3,
    pub translation_right: Vec3,
}

/// Activations kept for the backward pass.
struct Forward {
    /// Input followed by each post-ReLU layer output; the last is the descriptor.
    acts: Vec<Vec<f64>>,
    left: Vec<Vec<f64>>,
    right: Vec<Vec<f64>>,
    translation: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderModel {
    dims: EncoderDims,
    layout: Layout,
    params: Vec<f64>,
}

impl EncoderModel {
    /// Glorot-uniform encoder weights from `seed`; zero biases and heads.
    pub fn new(dims: EncoderDims, seed: u64) -> Result<Self> {
        dims.validate()?;
        let layout = Layout::new(&dims);
        let mut params = vec![0.0; layout.len];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for d in &layout.encoder {
            let a = (6.0 / (d.inputs + d.outputs) as f64).sqrt();
            for w in &mut params[d.offset..d.bias()] {
                *w = rng.random_range(-a..a);
            }
        }
        Ok(EncoderModel { dims, layout, params })
    }

    pub fn from_params(dims: EncoderDims, params: Vec<f64>) -> Result<Self> {
        dims.validate()?;
        let layout = Layout::new(&dims);
        if params.len() != layout.len {
            return Err(Error::DimensionMismatch(format!(
                "{} parameters for a model of {}",
                params.len(),
                layout.len
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidInput("model parameters must be finite".into()));
        }
        Ok(EncoderModel { dims, layout, params })
    }

    pub fn dims(&self) -> &EncoderDims {
        &self.dims
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.layout.len
    }

    pub fn index_map(&self) -> Vec<ParamBlock> {
        let block = |name: String, d: &Dense| ParamBlock {
            name,
            offset: d.offset,
            shape: [d.outputs, d.inputs],
        };
        let mut out: Vec<ParamBlock> = self
            .layout
            .encoder
            .iter()
            .enumerate()
            .map(|(i, d)| block(format!("encoder.{i}"), d))
            .collect();
        out.extend(self.layout.left.iter().enumerate().map(|(i, d)| block(format!("head.left.{i}"), d)));
        out.extend(self.layout.right.iter().enumerate().map(|(i, d)| block(format!("head.right.{i}"), d)));
        out.push(block("head.translation".into(), &self.layout.translation));
        out
    }

    /// Equalized, `[0, 1]`-scaled, pooled network input.
    pub fn preprocess(&self, img: &ProjectionImage) -> Result<Vec<f64>> {
        let d = &self.dims;
        if img.height != d.image_rows || img.width != d.image_cols {
            return Err(Error::DimensionMismatch(format!(
                "image is {}x{}, model expects {}x{}",
                img.height, img.width, d.image_rows, d.image_cols
            )));
        }
        let (lo, hi) = img.min_max();
        if !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidInput("image contains non-finite pixels".into()));
        }
        // Constant images carry no signal and map to zero.
        let eq = if hi > lo {
            histogram_equalize(img).data
        } else {
            vec![0.0; img.data.len()]
        };
        let (p, pc) = (d.pool, d.image_cols / d.pool);
        let norm = 1.0 / (p * p) as f64;
        let mut out = vec![0.0; d.input_len()];
        for r in 0..d.image_rows {
            for c in 0..d.image_cols {
                out[(r / p) * pc + c / p] += eq[r * d.image_cols + c];
            }
        }
        out.iter_mut().for_each(|v| *v *= norm);
        Ok(out)
    }

    /// Descriptor of a projection image.
    pub fn encode(&self, img: &ProjectionImage) -> Result<Vec<f64>> {
        let x = self.preprocess(img)?;
        Ok(self.forward(&x).acts.pop().expect("descriptor"))
    }

    fn forward(&self, input: &[f64]) -> Forward {
        let mut acts = vec![input.to_vec()];
        for d in &self.layout.encoder {
            let mut y = Vec::with_capacity(d.outputs);
            d.forward(&self.params, acts.last().expect("input"), &mut y);
            y.iter_mut().for_each(|v| *v = v.max(0.0));
            acts.push(y);
        }
        let desc = acts.last().expect("descriptor");
        let head = |d: &Dense| {
            let mut y = Vec::with_capacity(d.outputs);
            d.forward(&self.params, desc, &mut y);
            y
        };
        let left = self.layout.left.iter().map(head).collect();
        let right = self.layout.right.iter().map(head).collect();
        let translation = head(&self.layout.translation);
        Forward {
            acts,
            left,
            right,
            translation,
        }
    }

    fn split_heads(&self, f: &Forward) -> Result<HeadOutputs> {
        let l3 = 3 * self.dims.lattice_size;
        let branch = |outs: &[Vec<f64>]| -> Result<BranchHeads> {
            Ok(BranchHeads {
                displacements: outs.iter().map(|o| Displacement::from_flat(&o[..l3])).collect::<Result<_>>()?,
                logits: outs.iter().map(|o| o[l3]).collect(),
            })
        };
        let t = &f.translation;
        Ok(HeadOutputs {
            left: branch(&f.left)?,
            right: branch(&f.right)?,
            translation_left: Vec3::new(t[0], t[1], t[2]),
            translation_right: Vec3::new(t[3], t[4], t[5]),
        })
    }

    /// Raw head outputs for a preprocessed input.
    pub fn heads(&self, input: &[f64]) -> Result<HeadOutputs> {
        if input.len() != self.dims.input_len() {
            return Err(Error::DimensionMismatch(format!(
                "input of length {}, model expects {}",
                input.len(),
                self.dims.input_len()
            )));
        }
        self.split_heads(&self.forward(input))
    }

    /// Pool sizes and lattice size must match the heads.
    pub fn check_templates(&self, left: &[FfdTemplate], right: &[FfdTemplate]) -> Result<()> {
        if left.len() != self.dims.templates_left || right.len() != self.dims.templates_right {
            return Err(Error::DimensionMismatch(format!(
                "model has {}+{} template heads, got {}+{} templates",
                self.dims.templates_left,
                self.dims.templates_right,
                left.len(),
                right.len()
            )));
        }
        if let Some(t) = left.iter().chain(right).find(|t| t.lattice_size() != self.dims.lattice_size) {
            return Err(Error::DimensionMismatch(format!(
                "template {} has {} control points, heads expect {}",
                t.name,
                t.lattice_size(),
                self.dims.lattice_size
            )));
        }
        Ok(())
    }

    /// Prediction for one image: per branch the highest-weight template,
    /// deformed by its head and placed at the predicted translation.
    pub fn infer(&self, img: &ProjectionImage, left: &[FfdTemplate], right: &[FfdTemplate]) -> Result<ReconstructedPair> {
        self.check_templates(left, right)?;
        let h = self.heads(&self.preprocess(img)?)?;
        let place = |b: &BranchHeads, ts: &[FfdTemplate], t: &Vec3| -> Result<(BranchPrediction, crate::mesh::Mesh)> {
            let selected = argmax(&b.logits);
            let mesh = ts[selected].deform(&b.displacements[selected])?.translate(t);
            let pred = BranchPrediction {
                selected,
                weights: normalize_weights(&b.logits),
                displacements: b.displacements.iter().map(Displacement::to_flat).collect(),
            };
            Ok((pred, mesh))
        };
        let (lp, lm) = place(&h.left, left, &h.translation_left)?;
        let (rp, rm) = place(&h.right, right, &h.translation_right)?;
        Ok(ReconstructedPair::new(lp, rp, h.translation_left, h.translation_right, lm, rm))
    }

    /// Objective on one example and, if requested, its gradient with respect
    /// to every parameter.
    pub fn loss_and_grad(
        &self,
        left: &[FfdTemplate],
        right: &[FfdTemplate],
        example: &TrainingExample,
        weights: &LossWeights,
        targets: (Vec3, Vec3),
        want_grad: bool,
    ) -> Result<(LossParts, f64, Option<Vec<f64>>)> {
        self.check_templates(left, right)?;
        if example.input.len() != self.dims.input_len() {
            return Err(Error::DimensionMismatch("example input does not match the model".into()));
        }
        let f = self.forward(&example.input);
        let h = self.split_heads(&f)?;
        let branch = |b: &BranchHeads, ts: &[FfdTemplate], target| -> Result<_> {
            let deformed = ts
                .iter()
                .zip(&b.displacements)
                .map(|(t, d)| t.deform_vertices(d))
                .collect::<Result<Vec<_>>>()?;
            let cands = BranchCandidates::new(deformed, b.logits.clone(), b.displacements.clone())?;
            Ok(branch_loss_and_grad(&cands, target, weights.lambda2))
        };
        let gl = branch(&h.left, left, &example.target_left)?;
        let gr = branch(&h.right, right, &example.target_right)?;
        let (tl, tr) = (h.translation_left, h.translation_right);
        let parts = LossParts {
            deform: gl.deform + gr.deform,
            translation: translation_loss(&tl, &tr, &targets.0, &targets.1),
            weight_reg: gl.weight_reg + gr.weight_reg,
        };
        let total = crate::losses::total_loss(&parts, weights);
        if !want_grad {
            return Ok((parts, total, None));
        }

        let mut grad = vec![0.0; self.layout.len];
        let desc = f.acts.last().expect("descriptor");
        let mut d_desc = vec![0.0; desc.len()];
        let mut add = |d: &Dense, dy: &[f64], grad: &mut [f64]| {
            let dx = d.backward(&self.params, desc, dy, grad, true);
            d_desc.iter_mut().zip(dx).for_each(|(a, b)| *a += b);
        };
        for (g, ts, heads) in [(&gl, left, &self.layout.left), (&gr, right, &self.layout.right)] {
            for (t, template) in ts.iter().enumerate() {
                let dp = grad_wrt_delta(&template.basis, &g.d_deformed[t])?;
                let mut dy: Vec<f64> = dp
                    .iter()
                    .zip(&g.d_delta[t])
                    .flat_map(|(a, b)| {
                        let s = a + b;
                        [s.x, s.y, s.z]
                    })
                    .collect();
                dy.push(g.d_logits[t]);
                add(&heads[t], &dy, &mut grad);
            }
        }
        let (dl, dr) = translation_grad(&tl, &tr, &targets.0, &targets.1);
        let s = weights.lambda1;
        let dy = [dl.x * s, dl.y * s, dl.z * s, dr.x * s, dr.y * s, dr.z * s];
        add(&self.layout.translation, &dy, &mut grad);

        let mut dy = d_desc;
        for (i, d) in self.layout.encoder.iter().enumerate().rev() {
            // ReLU mask from the layer's own output.
            for (g, a) in dy.iter_mut().zip(&f.acts[i + 1]) {
                if *a <= 0.0 {
                    *g = 0.0;
                }
            }
            dy = d.backward(&self.params, &f.acts[i], &dy, &mut grad, i > 0);
        }
        Ok((parts, total, Some(grad)))
    }

    #[cfg(test)]
    fn head_is_zero(&self) -> bool {
        self.layout
            .heads()
            .all(|d| self.params[d.offset..d.offset + d.len()].iter().all(|&p| p == 0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ffd::DEFAULT_DEGREES;
    use crate::mesh::{sample_surface, shapes, validate_manifold, Mesh};
    use crate::projection::Geometry;

    fn small_dims() -> EncoderDims {
        EncoderDims {
            image_rows: 8,
            image_cols: 12,
            pool: 2,
            hidden: vec![10, 7],
            templates_left: 2,
            templates_right: 1,
            ..EncoderDims::default()
        }
    }

    fn image(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> ProjectionImage {
        let data = (0..rows * cols).map(|p| f(p / cols, p % cols)).collect();
        ProjectionImage::new(cols, rows, data, Geometry::default()).unwrap()
    }

    fn templates() -> (Vec<FfdTemplate>, Vec<FfdTemplate>) {
        let t = |r: f64, sx: f64| {
            let m = shapes::uv_sphere(Vec3::zeros(), r, 5, 9);
            let v = m.vertices().iter().map(|p| Vec3::new(p.x * sx, p.y, p.z)).collect();
            FfdTemplate::centered("s", m.with_vertices(v).unwrap(), DEFAULT_DEGREES).unwrap()
        };
        (vec![t(0.2, 1.0), t(0.2, 0.7)], vec![t(0.25, 1.2)])
    }

    #[test]
    fn layout_is_contiguous_and_heads_have_template_width() {
        let m = EncoderModel::new(EncoderDims::default(), 0).unwrap();
        let map = m.index_map();
        let mut off = 0;
        for b in &map {
            assert_eq!(b.offset, off, "{}", b.name);
            off += (b.shape[1] + 1) * b.shape[0];
        }
        assert_eq!(off, m.param_count());
        assert_eq!(map[0].shape, [256, 3072]);
        assert!(map.iter().filter(|b| b.name.starts_with("head.left") || b.name.starts_with("head.right")).all(|b| b.shape == [193, 256]));
        assert_eq!(map.last().unwrap().shape, [6, 256]);
        assert!(m.head_is_zero());
    }

    #[test]
    fn glorot_bounds() {
        let m = EncoderModel::new(small_dims(), 3).unwrap();
        let a = (6.0f64 / (24.0 + 10.0)).sqrt();
        let w = &m.params()[..24 * 10];
        assert!(w.iter().all(|x| x.abs() <= a));
        assert!(w.iter().any(|x| x.abs() > a / 2.0));
        assert!(m.params()[240..250].iter().all(|&b| b == 0.0));
    }

    #[test]
    fn pooling_averages_blocks() {
        let m = EncoderModel::new(small_dims(), 0).unwrap();
        // Two-level image: equalized left half ~0.5, right half 1.
        let x = m.preprocess(&image(8, 12, |_, c| if c < 6 { 1.0 } else { 2.0 })).unwrap();
        assert_eq!(x.len(), 24);
        for (i, v) in x.iter().enumerate() {
            let want = if i % 6 < 3 { 0.5 } else { 1.0 };
            assert!((v - want).abs() < 1e-12);
        }
        assert!(m.preprocess(&image(8, 10, |_, _| 0.0)).is_err());
    }

    #[test]
    fn zero_image_gives_bias_pathway_descriptor() {
        let mut m = EncoderModel::new(small_dims(), 1).unwrap();
        let l0 = m.layout.encoder[0];
        for b in &mut m.params[l0.bias()..l0.bias() + l0.outputs] {
            *b = 0.3;
        }
        let d = m.encode(&image(8, 12, |_, _| 0.0)).unwrap();
        // Input is zero, so layer 1 outputs relu(b1) and so on.
        let mut h = vec![0.3; 10];
        for l in &m.layout.encoder[1..] {
            let mut y = Vec::new();
            l.forward(&m.params, &h, &mut y);
            h = y.into_iter().map(|v| v.max(0.0)).collect();
        }
        assert_eq!(d, h);
        assert_eq!(d, m.encode(&image(8, 12, |_, _| 7.0)).unwrap());
    }

    #[test]
    fn encode_is_deterministic_and_finite() {
        let m = EncoderModel::new(EncoderDims::default(), 9).unwrap();
        let img = image(192, 256, |r, c| ((r * 31 + c * 17) % 101) as f64);
        let a = m.encode(&img).unwrap();
        assert_eq!(a.len(), 256);
        assert!(a.iter().all(|v| v.is_finite()));
        assert_eq!(a, m.encode(&img).unwrap());
        assert_eq!(a, EncoderModel::new(EncoderDims::default(), 9).unwrap().encode(&img).unwrap());
    }

    #[test]
    fn untrained_model_places_identity_templates_at_translation_bias() {
        let (tl, tr) = templates();
        let mut m = EncoderModel::new(small_dims(), 0).unwrap();
        let t = m.layout.translation;
        m.params[t.bias()..t.bias() + 6].copy_from_slice(&[0.3, 0.0, 0.1, -0.3, 0.05, 0.0]);
        let out = m.infer(&image(8, 12, |r, c| (r + c) as f64), &tl, &tr).unwrap();
        assert_eq!(out.left.selected, 0);
        assert_eq!(out.left.weights, vec![0.5, 0.5]);
        let want = tl[0].mesh.translate(&Vec3::new(0.3, 0.0, 0.1));
        for (a, b) in out.left_mesh.vertices().iter().zip(want.vertices()) {
            assert!((a - b).norm() < 1e-12);
        }
        assert_eq!(out.right_mesh.faces(), tr[0].mesh.faces());
        assert_eq!(out.translation_right, Vec3::new(-0.3, 0.05, 0.0));
    }

    #[test]
    fn random_heads_keep_connectivity_and_manifoldness() {
        let (tl, tr) = templates();
        let mut m = EncoderModel::new(small_dims(), 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for p in m.params_mut() {
            *p += rng.random_range(-0.01..0.01);
        }
        let out = m.infer(&image(8, 12, |r, c| ((r * 7 + c * 3) % 5) as f64), &tl, &tr).unwrap();
        let s: f64 = out.left.weights.iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert_eq!(out.left_mesh.faces(), tl[out.left.selected].mesh.faces());
        assert!(validate_manifold(&out.mesh).is_closed_manifold);
    }

    #[test]
    fn rejects_mismatched_templates() {
        let (_, tr) = templates();
        let m = EncoderModel::new(small_dims(), 0).unwrap();
        let img = image(8, 12, |_, _| 0.0);
        assert!(m.infer(&img, &tr, &tr).is_err());
        let coarse = FfdTemplate::centered("c", shapes::unit_cube(), [1, 1, 1]).unwrap();
        assert!(m.infer(&img, &[coarse.clone(), coarse], &tr).is_err());
    }

    fn example(m: &EncoderModel, tl: &[FfdTemplate], tr: &[FfdTemplate]) -> TrainingExample {
        let gl: Mesh = tl[1].mesh.clone();
        let gl = gl.with_vertices(gl.vertices().iter().map(|p| p * 1.1).collect()).unwrap();
        let gr = tr[0].mesh.with_vertices(tr[0].mesh.vertices().iter().map(|p| Vec3::new(p.x, p.y * 0.9, p.z)).collect()).unwrap();
        TrainingExample::from_points(
            m.preprocess(&image(8, 12, |r, c| ((r * 5 + c * 11) % 13) as f64)).unwrap(),
            sample_surface(&gl, 150, 1).unwrap(),
            sample_surface(&gr, 150, 2).unwrap(),
            Vec3::new(0.3, 0.0, 0.0),
            Vec3::new(-0.3, 0.0, 0.0),
        )
    }

    #[test]
    fn end_to_end_gradient_matches_central_differences() {
        let (tl, tr) = templates();
        let mut m = EncoderModel::new(small_dims(), 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for p in m.params_mut() {
            *p += rng.random_range(-0.02..0.02);
        }
        let ex = example(&m, &tl, &tr);
        let w = LossWeights::default();
        let tg = (ex.ctr_l, ex.ctr_r);
        let (_, _, g) = m.loss_and_grad(&tl, &tr, &ex, &w, tg, true).unwrap();
        let g = g.unwrap();
        let h = 1e-6;
        let mut checked = 0;
        for _ in 0..60 {
            let i = rng.random_range(0..m.param_count());
            let orig = m.params[i];
            m.params[i] = orig + h;
            let up = m.loss_and_grad(&tl, &tr, &ex, &w, tg, false).unwrap().1;
            m.params[i] = orig - h;
            let dn = m.loss_and_grad(&tl, &tr, &ex, &w, tg, false).unwrap().1;
            m.params[i] = orig;
            let fd = (up - dn) / (2.0 * h);
            let scale = fd.abs().max(g[i].abs());
            if scale < 1e-6 {
                continue;
            }
            assert!((fd - g[i]).abs() / scale < 1e-3, "param {i}: fd {fd} analytic {}", g[i]);
            checked += 1;
        }
        assert!(checked > 20, "{checked}");
    }
}
