//! Synthetic training data: deformed lung pairs, the matching warped phantom
//! and its noisy radiograph.
//!
//! Per sample: both lungs are stretched globally, optionally dented or
//! bulged locally and shifted; the per-vertex displacement from the phantom's
//! own lungs is spread onto the voxel grid, the phantom is warped through it,
//! projected front-on and corrupted with detector noise. Ground-truth meshes
//! are rescaled so the pair is one unit tall and each lung is moved to the
//! origin; their offsets are kept as the branch centres.

mod deform;
mod io;
mod phantom;
pub mod templates;

pub use deform::{apply_global_scale, apply_local_bump, displace_bump, Bump, GlobalScale, BUMP_ATTEMPTS};
pub use io::{generate_dataset, load_sample, read_manifest, split_counts, Manifest, SampleMeta, StoredSample};
pub use phantom::{build_phantom, Phantom, PhantomConfig, MM_PER_UNIT};
pub use templates::{canonical_center, lung_template, template_pool, Resolution, Side, VARIANT_NAMES};

use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::mesh::{Axis, Mesh};
use crate::projection::{apply_noise, project, Geometry, NoiseParams, ProjectionImage};
use crate::volume::{mesh_dvf, voxel_dvf, warp_volume, VoxelDvfConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Upper bound on the normalized pair bounding box.
pub const NORMALIZED_BOX: [f64; 3] = [1.35, 1.25, 1.0];
pub const BOX_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatagenConfig {
    pub n_samples: usize,
    /// Per-axis factor range for constant scaling, and endpoint range for
    /// gradient scaling.
    pub scale_range: [f64; 2],
    /// Chance that a lung gets a gradient rather than a constant scale.
    pub gradient_probability: f64,
    /// Chance that a sample gets local bumps.
    pub bump_probability: f64,
    pub bump_count: [usize; 2],
    pub bump_radius: [f64; 2],
    pub bump_amplitude: [f64; 2],
    /// Maximum absolute centre shift per axis, model units.
    pub center_jitter: f64,
    /// Template variants drawn from, uniformly.
    pub variants: Vec<usize>,
    pub noise: Option<NoiseParams>,
    pub resolution: Resolution,
    pub phantom: PhantomConfig,
    pub projection: Geometry,
    pub dvf: VoxelDvfConfig,
    /// Redraws allowed per sample before giving up.
    pub max_attempts: usize,
    pub seed: u64,
}

impl Default for DatagenConfig {
    fn default() -> Self {
        DatagenConfig {
            n_samples: 542,
            scale_range: [0.85, 1.15],
            gradient_probability: 0.3,
            bump_probability: 0.3,
            bump_count: [1, 3],
            bump_radius: [0.05, 0.2],
            bump_amplitude: [-0.08, 0.08],
            center_jitter: 0.05,
            variants: vec![0, 1],
            noise: Some(NoiseParams::default()),
            resolution: Resolution::R2_5k,
            phantom: PhantomConfig::default(),
            projection: Geometry::parallel(),
            dvf: VoxelDvfConfig::default(),
            max_attempts: 50,
            seed: 0,
        }
    }
}

fn ordered(name: &str, r: [f64; 2]) -> Result<()> {
    if !(r[0] <= r[1]) || !r[0].is_finite() || !r[1].is_finite() {
        return Err(Error::InvalidInput(format!("{name} range must be ordered, got {r:?}")));
    }
    Ok(())
}

impl DatagenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::InvalidInput("n_samples must be at least 1".into()));
        }
        ordered("scale", self.scale_range)?;
        ordered("bump radius", self.bump_radius)?;
        ordered("bump amplitude", self.bump_amplitude)?;
        if self.scale_range[0] <= 0.0 || self.bump_radius[0] <= 0.0 {
            return Err(Error::InvalidInput("scale and bump radius ranges must be positive".into()));
        }
        if self.bump_count[0] > self.bump_count[1] {
            return Err(Error::InvalidInput("bump count range must be ordered".into()));
        }
        for (name, p) in [("gradient", self.gradient_probability), ("bump", self.bump_probability)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidInput(format!("{name} probability must be in [0, 1]")));
            }
        }
        if !(self.center_jitter >= 0.0) {
            return Err(Error::InvalidInput("centre jitter must be non-negative".into()));
        }
        if self.variants.is_empty() || self.variants.iter().any(|&v| v >= VARIANT_NAMES.len()) {
            return Err(Error::InvalidInput(format!("template variants must be drawn from 0..{}", VARIANT_NAMES.len())));
        }
        if self.max_attempts == 0 {
            return Err(Error::InvalidInput("max_attempts must be positive".into()));
        }
        self.projection.validate()
    }

    /// No deformation, shift or noise: samples reproduce the phantom.
    pub fn identity() -> Self {
        DatagenConfig {
            scale_range: [1.0, 1.0],
            gradient_probability: 0.0,
            bump_probability: 0.0,
            center_jitter: 0.0,
            variants: vec![0],
            noise: None,
            ..DatagenConfig::default()
        }
    }
}

/// Deformation applied to one lung, in application order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SideParams {
    pub variant: usize,
    pub scale: GlobalScale,
    pub bumps: Vec<Bump>,
    pub shift: [f64; 3],
}

impl SideParams {
    pub fn identity(variant: usize) -> Self {
        SideParams {
            variant,
            scale: GlobalScale::identity(),
            bumps: Vec::new(),
            shift: [0.0; 3],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleParams {
    pub left: SideParams,
    pub right: SideParams,
}

impl SampleParams {
    pub fn identity() -> Self {
        SampleParams {
            left: SideParams::identity(0),
            right: SideParams::identity(0),
        }
    }
}

/// Template meshes at canonical positions, indexed by variant.
#[derive(Debug, Clone)]
pub struct TemplateSet {
    pub left: Vec<Mesh>,
    pub right: Vec<Mesh>,
}

impl TemplateSet {
    pub fn canonical(resolution: Resolution) -> Result<Self> {
        Ok(TemplateSet {
            left: template_pool(Side::Left, resolution)?,
            right: template_pool(Side::Right, resolution)?,
        })
    }

    pub fn side(&self, side: Side) -> &[Mesh] {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Sample {
    pub id: usize,
    /// Noisy line-integral image (not equalized).
    pub image: ProjectionImage,
    /// Normalized ground truth, each at the origin.
    pub gt_left: Mesh,
    pub gt_right: Mesh,
    pub ctr_l: Vec3,
    pub ctr_r: Vec3,
    pub params: SampleParams,
    /// Factor mapping deformed model units to the normalized frame.
    pub normalization: f64,
    pub noise_seed: u64,
}

/// Applies recorded parameters to a template without validity checks.
pub fn apply_side_params(template: &Mesh, p: &SideParams) -> Result<Mesh> {
    let mut m = apply_global_scale(template, &p.scale)?;
    for b in &p.bumps {
        m = displace_bump(&m, b)?;
    }
    Ok(m.translate(&Vec3::from(p.shift)))
}

fn draw_scale(cfg: &DatagenConfig, rng: &mut ChaCha8Rng) -> GlobalScale {
    let r = cfg.scale_range;
    let gradient = cfg.gradient_probability > 0.0 && rng.random_bool(cfg.gradient_probability);
    if gradient {
        let axis = [Axis::X, Axis::Y, Axis::Z][rng.random_range(0..3)];
        GlobalScale::Gradient {
            axis,
            s0: uniform(rng, r),
            s1: uniform(rng, r),
        }
    } else {
        GlobalScale::Constant {
            factors: [uniform(rng, r), uniform(rng, r), uniform(rng, r)],
        }
    }
}

fn uniform(rng: &mut ChaCha8Rng, r: [f64; 2]) -> f64 {
    if r[0] < r[1] {
        rng.random_range(r[0]..=r[1])
    } else {
        r[0]
    }
}

/// Draws and applies one lung's deformation; bumps are validated as drawn.
fn realize_side(template: &Mesh, variant: usize, bumps: usize, cfg: &DatagenConfig, rng: &mut ChaCha8Rng) -> Result<(Mesh, SideParams)> {
    let scale = draw_scale(cfg, rng);
    let mut m = apply_global_scale(template, &scale)?;
    let mut applied = Vec::new();
    for _ in 0..bumps {
        let v = m.vertices()[rng.random_range(0..m.vertex_count())];
        let b = Bump {
            center: [v.x, v.y, v.z],
            radius: uniform(rng, cfg.bump_radius),
            amplitude: uniform(rng, cfg.bump_amplitude),
        };
        let (out, got) = apply_local_bump(&m, &b, rng.random())?;
        if let Some(b) = got {
            applied.push(b);
            m = out;
        }
    }
    let j = cfg.center_jitter;
    let shift = if j > 0.0 {
        [0; 3].map(|_| rng.random_range(-j..=j))
    } else {
        [0.0; 3]
    };
    let params = SideParams {
        variant,
        scale,
        bumps: applied,
        shift,
    };
    Ok((m.translate(&Vec3::from(shift)), params))
}

/// Scales the pair about the origin to unit height and checks it against
/// [`NORMALIZED_BOX`] and left/right separation. Returns the factor.
pub fn normalization_factor(left: &Mesh, right: &Mesh) -> Result<f64> {
    let (bl, br) = (left.bounding_box()?, right.bounding_box()?);
    if br.max[0] >= bl.min[0] {
        return Err(Error::InvalidInput("lungs overlap along x".into()));
    }
    let ext = bl.union(&br).extent();
    let f = 1.0 / ext.z;
    for a in 0..3 {
        if ext[a] * f > NORMALIZED_BOX[a] + BOX_TOLERANCE {
            return Err(Error::InvalidInput(format!(
                "normalized extent {:.4} exceeds {} along axis {a}",
                ext[a] * f,
                NORMALIZED_BOX[a]
            )));
        }
    }
    Ok(f)
}

fn scaled(mesh: &Mesh, f: f64) -> Mesh {
    Mesh::new(mesh.vertices().iter().map(|v| v * f).collect(), mesh.faces().to_vec()).expect("same connectivity")
}

/// Radiograph of the phantom warped so its lungs move onto `left`/`right`
/// (model units).
pub fn render(phantom: &Phantom, left: &Mesh, right: &Mesh, cfg: &DatagenConfig, noise_seed: u64) -> Result<ProjectionImage> {
    let source = Mesh::merge(&[&phantom.lungs[0], &phantom.lungs[1]]);
    let target = Mesh::merge(&[&phantom.model_to_mm(left), &phantom.model_to_mm(right)]);
    let dvf = mesh_dvf(&source, &target)?;
    let field = voxel_dvf(&phantom.volume, &source, &dvf, &cfg.dvf)?;
    let warped = if field.max_norm() == 0.0 {
        phantom.volume.clone()
    } else {
        warp_volume(&phantom.volume, &field)?
    };
    let image = project(&warped, &cfg.projection)?;
    match &cfg.noise {
        Some(n) => apply_noise(&image, n, noise_seed),
        None => Ok(image),
    }
}

/// Builds a sample from explicit parameters.
pub fn sample_from_params(
    id: usize,
    phantom: &Phantom,
    templates: &TemplateSet,
    params: &SampleParams,
    cfg: &DatagenConfig,
    noise_seed: u64,
) -> Result<Sample> {
    let pick = |side: Side, p: &SideParams| -> Result<Mesh> {
        let t = templates
            .side(side)
            .get(p.variant)
            .ok_or_else(|| Error::InvalidInput(format!("no {side:?} template variant {}", p.variant)))?;
        apply_side_params(t, p)
    };
    let left = pick(Side::Left, &params.left)?;
    let right = pick(Side::Right, &params.right)?;
    assemble(id, phantom, &left, &right, params.clone(), cfg, noise_seed)
}

fn assemble(
    id: usize,
    phantom: &Phantom,
    left: &Mesh,
    right: &Mesh,
    params: SampleParams,
    cfg: &DatagenConfig,
    noise_seed: u64,
) -> Result<Sample> {
    let f = normalization_factor(left, right)?;
    let image = render(phantom, left, right, cfg, noise_seed)?;
    let (nl, nr) = (scaled(left, f), scaled(right, f));
    let ctr_l = nl.bounding_box()?.center();
    let ctr_r = nr.bounding_box()?.center();
    Ok(Sample {
        id,
        image,
        gt_left: nl.translate(&-ctr_l),
        gt_right: nr.translate(&-ctr_r),
        ctr_l,
        ctr_r,
        params,
        normalization: f,
        noise_seed,
    })
}

/// Draws a random valid sample. Randomness comes from the ChaCha stream
/// `(cfg.seed, id)` only.
pub fn generate_sample(id: usize, phantom: &Phantom, templates: &TemplateSet, cfg: &DatagenConfig) -> Result<Sample> {
    cfg.validate()?;
    if templates.left[0].faces() != phantom.lungs[0].faces() || templates.right[0].faces() != phantom.lungs[1].faces() {
        return Err(Error::DimensionMismatch("templates and phantom lungs must share connectivity".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(id as u64);
    let mut last_err = None;
    for _ in 0..cfg.max_attempts {
        let bumped = cfg.bump_probability > 0.0 && rng.random_bool(cfg.bump_probability);
        let counts: [usize; 2] = if bumped {
            let total = rng.random_range(cfg.bump_count[0]..=cfg.bump_count[1]).max(1);
            let left = rng.random_range(0..=total);
            [left, total - left]
        } else {
            [0, 0]
        };
        let vl = cfg.variants[rng.random_range(0..cfg.variants.len())];
        let vr = cfg.variants[rng.random_range(0..cfg.variants.len())];
        let (left, pl) = realize_side(&templates.left[vl], vl, counts[0], cfg, &mut rng)?;
        let (right, pr) = realize_side(&templates.right[vr], vr, counts[1], cfg, &mut rng)?;
        let noise_seed = rng.random();
        match normalization_factor(&left, &right) {
            Ok(_) => {
                let params = SampleParams { left: pl, right: pr };
                return assemble(id, phantom, &left, &right, params, cfg, noise_seed);
            }
            Err(e) => last_err = Some(e),
        }
    }
    Err(Error::InvalidInput(format!(
        "sample {id}: no valid draw in {} attempts (last: {})",
        cfg.max_attempts,
        last_err.map(|e| e.to_string()).unwrap_or_default()
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::validate_manifold;

    fn small_cfg() -> DatagenConfig {
        DatagenConfig {
            resolution: Resolution::Custom(12, 24),
            phantom: PhantomConfig::coarse(),
            ..DatagenConfig::default()
        }
    }

    #[test]
    fn identity_sample_reproduces_phantom_projection() {
        let cfg = DatagenConfig {
            phantom: PhantomConfig::coarse(),
            resolution: Resolution::Custom(12, 24),
            ..DatagenConfig::identity()
        };
        let phantom = build_phantom(&cfg.phantom, cfg.resolution).unwrap();
        let t = TemplateSet::canonical(cfg.resolution).unwrap();
        let s = generate_sample(0, &phantom, &t, &cfg).unwrap();
        let direct = project(&phantom.volume, &cfg.projection).unwrap();
        let diff = s.image.data.iter().zip(&direct.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff <= 1e-6, "{diff}");
        assert_eq!(s.params, SampleParams::identity());
    }

    #[test]
    fn shifting_one_lung_moves_its_centre() {
        let cfg = DatagenConfig {
            noise: None,
            ..small_cfg()
        };
        let phantom = build_phantom(&cfg.phantom, cfg.resolution).unwrap();
        let t = TemplateSet::canonical(cfg.resolution).unwrap();
        let base = sample_from_params(0, &phantom, &t, &SampleParams::identity(), &cfg, 0).unwrap();
        let mut p = SampleParams::identity();
        p.left.shift = [0.03, -0.02, 0.0];
        let moved = sample_from_params(0, &phantom, &t, &p, &cfg, 0).unwrap();
        assert_eq!(base.normalization, moved.normalization);
        let d = moved.ctr_l - base.ctr_l - Vec3::new(0.03, -0.02, 0.0) * base.normalization;
        assert!(d.norm() < 1e-12, "{d:?}");
        assert_eq!(moved.ctr_r, base.ctr_r);
        assert_ne!(moved.image, base.image);
    }

    #[test]
    fn random_samples_satisfy_invariants_and_are_deterministic() {
        let cfg = DatagenConfig {
            bump_probability: 1.0,
            ..small_cfg()
        };
        let phantom = build_phantom(&cfg.phantom, cfg.resolution).unwrap();
        let t = TemplateSet::canonical(cfg.resolution).unwrap();
        for id in 0..4 {
            let s = generate_sample(id, &phantom, &t, &cfg).unwrap();
            for m in [&s.gt_left, &s.gt_right] {
                assert!(validate_manifold(m).is_closed_manifold);
                assert!(m.bounding_box().unwrap().center().norm() < 1e-12);
            }
            let l = s.gt_left.translate(&s.ctr_l).bounding_box().unwrap();
            let r = s.gt_right.translate(&s.ctr_r).bounding_box().unwrap();
            let e = l.union(&r).extent();
            assert!((e.z - 1.0).abs() < 1e-9);
            for a in 0..3 {
                assert!(e[a] <= NORMALIZED_BOX[a] + BOX_TOLERANCE);
            }
            assert!(s.ctr_l.x > 0.0 && s.ctr_r.x < 0.0);
            let again = generate_sample(id, &phantom, &t, &cfg).unwrap();
            assert_eq!(again.image, s.image);
            assert_eq!(again.params, s.params);
        }
    }

    #[test]
    fn config_validation() {
        assert!(DatagenConfig::default().validate().is_ok());
        let bad = DatagenConfig {
            scale_range: [1.2, 0.8],
            ..DatagenConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = DatagenConfig {
            n_samples: 0,
            ..DatagenConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
