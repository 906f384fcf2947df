//! Reconstruction strategies behind one interface: direct geometric fitting
//! against target geometry, and the image encoder.

use crate::encoder::EncoderModel;
use crate::error::{Error, Result};
use crate::ffd::FfdTemplate;
use crate::fit::{fit_organ_pair, BranchFit, FitConfig, PairFit, PairTarget};
use crate::geom::Vec3;
use crate::mesh::Mesh;
use crate::projection::ProjectionImage;
use crate::registry::Registry;
use serde::{Deserialize, Serialize};
use std::sync::{Arc, OnceLock};

/// Template choice and per-template outputs of one branch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchPrediction {
    pub selected: usize,
    /// Softmax selection weights; they sum to 1.
    pub weights: Vec<f64>,
    /// Flattened displacement per template.
    pub displacements: Vec<Vec<f64>>,
}

/// Two-lung prediction: the selected deformed templates, translated.
#[derive(Debug, Clone)]
pub struct ReconstructedPair {
    pub left: BranchPrediction,
    pub right: BranchPrediction,
    pub translation_left: Vec3,
    pub translation_right: Vec3,
    pub left_mesh: Mesh,
    pub right_mesh: Mesh,
    /// Left then right.
    pub mesh: Mesh,
}

impl ReconstructedPair {
    pub fn new(
        left: BranchPrediction,
        right: BranchPrediction,
        translation_left: Vec3,
        translation_right: Vec3,
        left_mesh: Mesh,
        right_mesh: Mesh,
    ) -> Self {
        ReconstructedPair {
            mesh: Mesh::merge(&[&left_mesh, &right_mesh]),
            left,
            right,
            translation_left,
            translation_right,
            left_mesh,
            right_mesh,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let v = |t: &Vec3| [t.x, t.y, t.z];
        serde_json::json!({
            "left": self.left,
            "right": self.right,
            "translation_left": v(&self.translation_left),
            "translation_right": v(&self.translation_right),
            "vertex_count": self.mesh.vertex_count(),
            "face_count": self.mesh.face_count(),
        })
    }
}

impl From<PairFit> for ReconstructedPair {
    fn from(f: PairFit) -> Self {
        let branch = |b: BranchFit| BranchPrediction {
            selected: b.selected,
            weights: b.weights,
            displacements: b.displacements,
        };
        ReconstructedPair {
            left: branch(f.left),
            right: branch(f.right),
            translation_left: f.translation_left,
            translation_right: f.translation_right,
            left_mesh: f.left_mesh,
            right_mesh: f.right_mesh,
            mesh: f.mesh,
        }
    }
}

/// Everything a strategy may draw on. Templates are centred at the origin.
pub struct ReconstructionContext<'a> {
    pub templates_left: &'a [FfdTemplate],
    pub templates_right: &'a [FfdTemplate],
    pub fit: FitConfig,
    pub model: Option<&'a EncoderModel>,
}

pub enum ReconstructionInput<'a> {
    Image(&'a ProjectionImage),
    Target(&'a PairTarget),
}

pub trait Reconstructor: Send + Sync {
    fn name(&self) -> &'static str;

    fn reconstruct(&self, ctx: &ReconstructionContext<'_>, input: &ReconstructionInput<'_>) -> Result<ReconstructedPair>;
}

/// Adam fit of every template against target geometry.
#[derive(Debug, Default)]
pub struct FitReconstructor;

impl Reconstructor for FitReconstructor {
    fn name(&self) -> &'static str {
        "fit"
    }

    fn reconstruct(&self, ctx: &ReconstructionContext<'_>, input: &ReconstructionInput<'_>) -> Result<ReconstructedPair> {
        match input {
            ReconstructionInput::Target(t) => Ok(fit_organ_pair(ctx.templates_left, ctx.templates_right, t, &ctx.fit)?.into()),
            ReconstructionInput::Image(_) => Err(Error::InvalidInput("the fit reconstructor needs target geometry".into())),
        }
    }
}

/// Single forward pass of a trained encoder.
#[derive(Debug, Default)]
pub struct EncoderReconstructor;

impl Reconstructor for EncoderReconstructor {
    fn name(&self) -> &'static str {
        "encoder"
    }

    fn reconstruct(&self, ctx: &ReconstructionContext<'_>, input: &ReconstructionInput<'_>) -> Result<ReconstructedPair> {
        let model = ctx
            .model
            .ok_or_else(|| Error::InvalidInput("the encoder reconstructor needs a model".into()))?;
        match input {
            ReconstructionInput::Image(img) => model.infer(img, ctx.templates_left, ctx.templates_right),
            ReconstructionInput::Target(_) => Err(Error::InvalidInput("the encoder reconstructor needs an image".into())),
        }
    }
}

/// Reconstructors by name: `encoder`, `fit`.
pub fn reconstructors() -> &'static Registry<dyn Reconstructor> {
    static REG: OnceLock<Registry<dyn Reconstructor>> = OnceLock::new();
    REG.get_or_init(|| {
        let mut r: Registry<dyn Reconstructor> = Registry::new("reconstructor");
        for s in [Arc::new(FitReconstructor) as Arc<dyn Reconstructor>, Arc::new(EncoderReconstructor)] {
            r.register(s.name(), s);
        }
        r
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ffd::DEFAULT_DEGREES;
    use crate::mesh::shapes;

    #[test]
    fn registry_and_input_kinds() {
        assert_eq!(reconstructors().names(), vec!["encoder", "fit"]);
        let t = FfdTemplate::centered("s", shapes::uv_sphere(Vec3::zeros(), 0.2, 6, 12), DEFAULT_DEGREES).unwrap();
        let ctx = ReconstructionContext {
            templates_left: std::slice::from_ref(&t),
            templates_right: std::slice::from_ref(&t),
            fit: FitConfig::default(),
            model: None,
        };
        let img = ProjectionImage::new(1, 1, vec![0.0], Default::default()).unwrap();
        let input = ReconstructionInput::Image(&img);
        assert!(reconstructors().get("fit").unwrap().reconstruct(&ctx, &input).is_err());
        assert!(reconstructors().get("encoder").unwrap().reconstruct(&ctx, &input).is_err());
    }

    #[test]
    fn fit_strategy_matches_direct_call() {
        let t = FfdTemplate::centered("s", shapes::uv_sphere(Vec3::zeros(), 0.2, 6, 12), DEFAULT_DEGREES).unwrap();
        let l = shapes::uv_sphere(Vec3::new(0.3, 0.0, 0.0), 0.22, 6, 12);
        let r = shapes::uv_sphere(Vec3::new(-0.3, 0.0, 0.0), 0.18, 6, 12);
        let target = PairTarget::Mesh(Mesh::merge(&[&l, &r]));
        let fit = FitConfig {
            steps: 20,
            target_sample_count: 200,
            ..FitConfig::default()
        };
        let ts = [t];
        let ctx = ReconstructionContext {
            templates_left: &ts,
            templates_right: &ts,
            fit,
            model: None,
        };
        let got = reconstructors()
            .get("fit")
            .unwrap()
            .reconstruct(&ctx, &ReconstructionInput::Target(&target))
            .unwrap();
        let direct = fit_organ_pair(&ts, &ts, &target, &fit).unwrap();
        assert_eq!(got.mesh, direct.mesh);
        assert_eq!(got.left.weights, direct.left.weights);
    }
}
