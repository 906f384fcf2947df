//! Voxel volumes, mesh-driven deformation vector fields and backward warping.
//!
//! Voxel `(i, j, k)` is stored at `i + nx * (j + ny * k)` and its centre sits
//! at `origin + spacing * (i + 0.5, j + 0.5, k + 0.5)`; `origin` is the outer
//! corner of the grid. Lengths are in millimetres.

mod dvf;
mod io;

pub use dvf::{mesh_dvf, voxel_dvf, VoxelDvfConfig};
pub use io::{read_volume, write_volume};

use crate::error::{Error, Result};
use crate::geom::Vec3;
use rayon::prelude::*;

/// Geometry shared by scalar volumes and vector fields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub dims: [usize; 3],
    pub spacing: Vec3,
    pub origin: Vec3,
}

impl Grid {
    pub fn new(dims: [usize; 3], spacing: Vec3, origin: Vec3) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::InvalidInput(format!("volume dims {dims:?} must be positive")));
        }
        if spacing.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidInput(format!("voxel spacing {spacing:?} must be positive")));
        }
        Ok(Grid {
            dims,
            spacing,
            origin,
        })
    }

    /// Grid of `dims` voxels centred on `center`.
    pub fn centered(dims: [usize; 3], spacing: Vec3, center: Vec3) -> Result<Self> {
        let half = Vec3::new(dims[0] as f64, dims[1] as f64, dims[2] as f64).component_mul(&spacing) * 0.5;
        Grid::new(dims, spacing, center - half)
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn ijk(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.dims[0];
        let r = idx / self.dims[0];
        [i, r % self.dims[1], r / self.dims[1]]
    }

    #[inline]
    pub fn center(&self, i: usize, j: usize, k: usize) -> Vec3 {
        Vec3::new(
            self.origin.x + self.spacing.x * (i as f64 + 0.5),
            self.origin.y + self.spacing.y * (j as f64 + 0.5),
            self.origin.z + self.spacing.z * (k as f64 + 0.5),
        )
    }

    pub fn center_of(&self, idx: usize) -> Vec3 {
        let [i, j, k] = self.ijk(idx);
        self.center(i, j, k)
    }

    /// Physical extent of the grid.
    pub fn size(&self) -> Vec3 {
        Vec3::new(self.dims[0] as f64, self.dims[1] as f64, self.dims[2] as f64).component_mul(&self.spacing)
    }

    pub fn upper(&self) -> Vec3 {
        self.origin + self.size()
    }
}

/// Scalar voxel volume (attenuation density, non-negative by convention).
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelVolume {
    pub grid: Grid,
    pub data: Vec<f64>,
}

impl VoxelVolume {
    pub fn zeros(grid: Grid) -> Self {
        VoxelVolume {
            data: vec![0.0; grid.len()],
            grid,
        }
    }

    pub fn from_data(grid: Grid, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {:?} grid",
                data.len(),
                grid.dims
            )));
        }
        Ok(VoxelVolume { grid, data })
    }

    /// Fills every voxel from a function of its centre.
    pub fn from_fn(grid: Grid, f: impl Fn(Vec3) -> f64 + Sync) -> Self {
        let data = (0..grid.len()).into_par_iter().map(|i| f(grid.center_of(i))).collect();
        VoxelVolume { grid, data }
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.grid.index(i, j, k)]
    }

    pub fn total(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Trilinear interpolation between voxel centres; voxels beyond the grid
    /// read as zero, so points more than half a voxel outside return 0.
    pub fn trilinear_sample(&self, p: &Vec3) -> f64 {
        let g = &self.grid;
        let mut base = [0i64; 3];
        let mut frac = [0.0f64; 3];
        for a in 0..3 {
            let c = (p[a] - g.origin[a]) / g.spacing[a] - 0.5;
            if !c.is_finite() || c <= -1.0 || c >= g.dims[a] as f64 {
                return 0.0;
            }
            let f = c.floor();
            base[a] = f as i64;
            frac[a] = c - f;
        }
        let mut acc = 0.0;
        for dz in 0..2i64 {
            let k = base[2] + dz;
            if k < 0 || k >= g.dims[2] as i64 {
                continue;
            }
            let wz = if dz == 0 { 1.0 - frac[2] } else { frac[2] };
            if wz == 0.0 {
                continue;
            }
            for dy in 0..2i64 {
                let j = base[1] + dy;
                if j < 0 || j >= g.dims[1] as i64 {
                    continue;
                }
                let wy = if dy == 0 { 1.0 - frac[1] } else { frac[1] };
                if wy == 0.0 {
                    continue;
                }
                for dx in 0..2i64 {
                    let i = base[0] + dx;
                    if i < 0 || i >= g.dims[0] as i64 {
                        continue;
                    }
                    let wx = if dx == 0 { 1.0 - frac[0] } else { frac[0] };
                    if wx == 0.0 {
                        continue;
                    }
                    acc += wx * wy * wz * self.get(i as usize, j as usize, k as usize);
                }
            }
        }
        acc
    }
}

/// Per-voxel displacement vectors (mm) on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub grid: Grid,
    pub data: Vec<Vec3>,
}

impl VectorField {
    pub fn zeros(grid: Grid) -> Self {
        VectorField {
            data: vec![Vec3::zeros(); grid.len()],
            grid,
        }
    }

    pub fn constant(grid: Grid, v: Vec3) -> Self {
        VectorField {
            data: vec![v; grid.len()],
            grid,
        }
    }

    pub fn max_norm(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// Backward warp: `out(α) = volume(α − field(α))`, trilinear, zero outside.
///
/// The field is the displacement of each voxel's content, so content found at
/// `α − field(α)` in the source ends up at `α`.
pub fn warp_volume(volume: &VoxelVolume, field: &VectorField) -> Result<VoxelVolume> {
    if volume.grid != field.grid {
        return Err(Error::DimensionMismatch("volume and field grids differ".into()));
    }
    let g = volume.grid;
    let data = (0..g.len())
        .into_par_iter()
        .map(|idx| {
            let d = field.data[idx];
            if d == Vec3::zeros() {
                volume.data[idx]
            } else {
                volume.trilinear_sample(&(g.center_of(idx) - d))
            }
        })
        .collect();
    Ok(VoxelVolume { grid: g, data })
}
