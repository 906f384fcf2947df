use super::templates::{lung_template, Resolution, Side};
use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::mesh::Mesh;
use crate::metrics::voxelize_on_grid;
use crate::volume::{Grid, VoxelVolume};
use serde::{Deserialize, Serialize};

/// Millimetres per normalized model unit.
pub const MM_PER_UNIT: f64 = 150.0;

/// Attenuation coefficients are per millimetre.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhantomConfig {
    pub dims: [usize; 3],
    pub spacing_mm: f64,
    pub body_mu: f64,
    pub spine_mu: f64,
    pub heart_mu: f64,
    pub lung_mu: f64,
    /// When false only the lungs are filled (with `lung_mu`).
    pub body: bool,
}

impl Default for PhantomConfig {
    fn default() -> Self {
        PhantomConfig {
            dims: [128, 128, 96],
            spacing_mm: 2.0,
            body_mu: 0.019,
            spine_mu: 0.04,
            heart_mu: 0.021,
            lung_mu: 0.004,
            body: true,
        }
    }
}

impl PhantomConfig {
    /// Same field of view with 4 mm voxels.
    pub fn coarse() -> Self {
        PhantomConfig {
            dims: [64, 64, 48],
            spacing_mm: 4.0,
            ..PhantomConfig::default()
        }
    }

    pub fn lungs_only() -> Self {
        PhantomConfig {
            body: false,
            ..PhantomConfig::default()
        }
    }
}

/// Density volume with the lung meshes it was filled from, in millimetres.
#[derive(Debug, Clone)]
pub struct Phantom {
    pub volume: VoxelVolume,
    /// Left, right: variant-0 templates mapped to millimetres.
    pub lungs: [Mesh; 2],
    pub center: Vec3,
    pub resolution: Resolution,
}

impl Phantom {
    pub fn model_to_mm(&self, mesh: &Mesh) -> Mesh {
        let c = self.center;
        Mesh::new(mesh.vertices().iter().map(|v| c + v * MM_PER_UNIT).collect(), mesh.faces().to_vec())
            .expect("same connectivity")
    }
}

pub fn build_phantom(cfg: &PhantomConfig, resolution: Resolution) -> Result<Phantom> {
    if !(cfg.spacing_mm > 0.0) {
        return Err(Error::InvalidInput("phantom spacing must be positive".into()));
    }
    let s = cfg.spacing_mm;
    let grid = Grid::centered(cfg.dims, Vec3::new(s, s, s), Vec3::zeros())?;
    let center = Vec3::zeros();
    let to_mm = |m: Mesh| {
        Mesh::new(m.vertices().iter().map(|v| center + v * MM_PER_UNIT).collect(), m.faces().to_vec())
    };
    let left = to_mm(lung_template(Side::Left, 0, resolution)?)?;
    let right = to_mm(lung_template(Side::Right, 0, resolution)?)?;
    let lungs = voxelize_on_grid(&Mesh::merge(&[&left, &right]), grid)?;
    let body = |p: Vec3| -> f64 {
        if !cfg.body {
            return 0.0;
        }
        let in_body = (p.x / 115.0).powi(2) + (p.y / 85.0).powi(2) <= 1.0;
        let spine = (p.x.powi(2) + (p.y - 60.0).powi(2)).sqrt() <= 15.0;
        let heart = ((p.x - 15.0) / 45.0).powi(2) + ((p.y + 20.0) / 40.0).powi(2) + ((p.z + 30.0) / 40.0).powi(2) <= 1.0;
        if spine {
            cfg.spine_mu
        } else if heart {
            cfg.heart_mu
        } else if in_body {
            cfg.body_mu
        } else {
            0.0
        }
    };
    let mut volume = VoxelVolume::from_fn(grid, body);
    for (v, &inside) in volume.data.iter_mut().zip(&lungs.occupied) {
        if inside {
            *v = cfg.lung_mu;
        }
    }
    Ok(Phantom {
        volume,
        lungs: [left, right],
        center,
        resolution,
    })
}
