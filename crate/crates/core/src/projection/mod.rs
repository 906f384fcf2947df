//! Digitally reconstructed radiographs: Siddon line integrals, selectable
//! ray geometries, the Poisson + Gaussian detector noise model, histogram
//! equalization and 16-bit PGM I/O.
//!
//! Front view: rays travel along +y (anterior to posterior in the normalized
//! frame). Detector columns run along +x, rows run from +z (row 0, top) down.
//! A non-zero view angle rotates the whole setup about the z axis through the
//! volume centre.

mod equalize;
mod geometry;
mod noise;
mod pgm;
mod siddon;

pub use equalize::histogram_equalize;
pub use geometry::{projectors, ConeBeam, ParallelBeam, RayGeometry};
pub use noise::{apply_noise, NoiseParams};
pub use pgm::{load_image, save_image};
pub use siddon::siddon_integral;

use crate::error::{Error, Result};
use crate::volume::VoxelVolume;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub const DETECTOR_ROWS: usize = 192;
pub const DETECTOR_COLS: usize = 256;

/// Acquisition geometry. `mode` names a registered [`RayGeometry`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub mode: String,
    pub source_to_axis_mm: f64,
    pub source_to_detector_mm: f64,
    pub detector_rows: usize,
    pub detector_cols: usize,
    pub pixel_spacing_mm: [f64; 2],
    pub view_angle_deg: f64,
}

impl Default for Geometry {
    fn default() -> Self {
        Geometry {
            mode: "parallel".into(),
            source_to_axis_mm: 1000.0,
            source_to_detector_mm: 1500.0,
            detector_rows: DETECTOR_ROWS,
            detector_cols: DETECTOR_COLS,
            pixel_spacing_mm: [1.0, 1.0],
            view_angle_deg: 0.0,
        }
    }
}

impl Geometry {
    pub fn parallel() -> Self {
        Geometry::default()
    }

    pub fn cone_beam() -> Self {
        Geometry {
            mode: "cone".into(),
            ..Geometry::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.detector_rows == 0 || self.detector_cols == 0 {
            return Err(Error::InvalidInput("detector must have pixels".into()));
        }
        if self.pixel_spacing_mm.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::InvalidInput("pixel spacing must be positive".into()));
        }
        if !self.view_angle_deg.is_finite() {
            return Err(Error::InvalidInput("view angle must be finite".into()));
        }
        projectors().get(&self.mode)?.validate(self)
    }
}

/// Row-major image; `data[row * width + col]`, row 0 at the top.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
    pub geometry: Geometry,
}

impl ProjectionImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>, geometry: Geometry) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{} pixels for a {width}x{height} image",
                data.len()
            )));
        }
        Ok(ProjectionImage {
            width,
            height,
            data,
            geometry,
        })
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }
}

/// One Siddon integral per detector pixel, rays from the geometry named by
/// `geometry.mode`.
pub fn project(volume: &VoxelVolume, geometry: &Geometry) -> Result<ProjectionImage> {
    geometry.validate()?;
    let caster = projectors().get(&geometry.mode)?;
    let (rows, cols) = (geometry.detector_rows, geometry.detector_cols);
    let data = (0..rows * cols)
        .into_par_iter()
        .map(|p| {
            let (a, b) = caster.ray(geometry, &volume.grid, p / cols, p % cols);
            siddon_integral(volume, &a, &b)
        })
        .collect();
    ProjectionImage::new(cols, rows, data, geometry.clone())
}
