use super::{Grid, VectorField, VoxelVolume};
use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::mesh::Mesh;
use crate::spatial::KdTree;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Per-vertex displacement `target − source` between two meshes with the
/// same connectivity.
pub fn mesh_dvf(source: &Mesh, target: &Mesh) -> Result<Vec<Vec3>> {
    if source.vertex_count() != target.vertex_count() || source.faces() != target.faces() {
        return Err(Error::DimensionMismatch(
            "source and target meshes must share connectivity".into(),
        ));
    }
    Ok(source
        .vertices()
        .iter()
        .zip(target.vertices())
        .map(|(s, t)| t - s)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoxelDvfConfig {
    /// Number of nearest mesh vertices blended per voxel.
    pub k_neighbors: usize,
    /// Near-field radius in mm; defaults to the largest vertex displacement.
    pub psi: Option<f64>,
    /// Divide by the weight sum so far-field weights form a convex blend.
    pub normalize: bool,
}

impl Default for VoxelDvfConfig {
    fn default() -> Self {
        VoxelDvfConfig {
            k_neighbors: 4,
            psi: None,
            normalize: false,
        }
    }
}

/// Interpolates a per-vertex DVF onto every voxel centre.
///
/// For the `K` nearest vertices (ties to the lower index) the weight is `1/K`
/// within `psi` and `1/(K d)` beyond it; weights are used as is unless
/// `normalize` is set.
pub fn voxel_dvf(volume: &VoxelVolume, mesh: &Mesh, dvf: &[Vec3], cfg: &VoxelDvfConfig) -> Result<VectorField> {
    voxel_dvf_on_grid(&volume.grid, mesh, dvf, cfg)
}

pub(crate) fn voxel_dvf_on_grid(grid: &Grid, mesh: &Mesh, dvf: &[Vec3], cfg: &VoxelDvfConfig) -> Result<VectorField> {
    if mesh.is_empty() {
        return Err(Error::InvalidInput("mesh has no vertices".into()));
    }
    if dvf.len() != mesh.vertex_count() {
        return Err(Error::DimensionMismatch(format!(
            "{} displacement vectors for {} vertices",
            dvf.len(),
            mesh.vertex_count()
        )));
    }
    if cfg.k_neighbors == 0 {
        return Err(Error::InvalidInput("k_neighbors must be >= 1".into()));
    }
    let psi = match cfg.psi {
        Some(p) if p > 0.0 => p,
        Some(p) => return Err(Error::InvalidInput(format!("psi must be positive, got {p}"))),
        None => dvf.iter().map(|d| d.norm()).fold(0.0, f64::max),
    };
    if dvf.iter().all(|d| *d == Vec3::zeros()) {
        return Ok(VectorField::zeros(*grid));
    }
    let tree = KdTree::new(mesh.vertices());
    let k = cfg.k_neighbors;
    let kf = k as f64;
    let data = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let alpha = grid.center_of(idx);
            let mut acc = Vec3::zeros();
            let mut wsum = 0.0;
            for (d2, vi) in tree.knn(&alpha, k) {
                let d = d2.sqrt();
                let h = if d <= psi { 1.0 / kf } else { 1.0 / (kf * d) };
                acc += dvf[vi] * h;
                wsum += h;
            }
            if cfg.normalize && wsum > 0.0 {
                acc / wsum
            } else {
                acc
            }
        })
        .collect();
    Ok(VectorField { grid: *grid, data })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::shapes::uv_sphere;

    fn small_grid() -> Grid {
        Grid::new([6, 6, 6], Vec3::new(1.0, 1.0, 1.0), Vec3::new(-3.0, -3.0, -3.0)).unwrap()
    }

    #[test]
    fn mesh_dvf_cases() {
        let s = uv_sphere(Vec3::zeros(), 1.0, 4, 8);
        assert!(mesh_dvf(&s, &s).unwrap().iter().all(|d| *d == Vec3::zeros()));
        let t = Vec3::new(1.0, 2.0, 3.0);
        for d in mesh_dvf(&s, &s.translate(&t)).unwrap() {
            assert!((d - t).norm() < 1e-12);
        }
        let scaled = s.with_vertices(s.vertices().iter().map(|v| v * 1.1).collect()).unwrap();
        for (d, v) in mesh_dvf(&s, &scaled).unwrap().iter().zip(s.vertices()) {
            assert!((d - v * 0.1).norm() < 1e-12);
        }
        let other = uv_sphere(Vec3::zeros(), 1.0, 5, 8);
        assert!(mesh_dvf(&s, &other).is_err());
    }

    #[test]
    fn zero_dvf_gives_zero_field() {
        let s = uv_sphere(Vec3::zeros(), 2.0, 4, 8);
        let vol = VoxelVolume::zeros(small_grid());
        let f = voxel_dvf(&vol, &s, &vec![Vec3::zeros(); s.vertex_count()], &VoxelDvfConfig::default()).unwrap();
        assert!(f.data.iter().all(|d| *d == Vec3::zeros()));
    }

    #[test]
    fn coincident_vertex_with_k1_copies_its_vector() {
        let g = small_grid();
        let c = g.center(2, 3, 4);
        let mesh = Mesh::new(
            vec![c, c + Vec3::new(10.0, 0.0, 0.0), c + Vec3::new(0.0, 10.0, 0.0)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let u = Vec3::new(0.3, -0.2, 0.1);
        let dvf = vec![u, Vec3::new(1.0, 1.0, 1.0), Vec3::new(-1.0, 0.0, 0.0)];
        let cfg = VoxelDvfConfig {
            k_neighbors: 1,
            ..Default::default()
        };
        let f = voxel_dvf(&VoxelVolume::zeros(g), &mesh, &dvf, &cfg).unwrap();
        assert_eq!(f.data[g.index(2, 3, 4)], u);
    }

    #[test]
    fn normalization_makes_uniform_dvf_exact() {
        let s = uv_sphere(Vec3::zeros(), 2.0, 4, 8);
        let u = Vec3::new(0.5, 0.0, 0.0);
        let dvf = vec![u; s.vertex_count()];
        let cfg = VoxelDvfConfig {
            normalize: true,
            ..Default::default()
        };
        let f = voxel_dvf(&VoxelVolume::zeros(small_grid()), &s, &dvf, &cfg).unwrap();
        assert!(f.data.iter().all(|d| (d - u).norm() < 1e-12));
    }

    #[test]
    fn invalid_inputs() {
        let s = uv_sphere(Vec3::zeros(), 2.0, 4, 8);
        let vol = VoxelVolume::zeros(small_grid());
        assert!(voxel_dvf(&vol, &s, &[Vec3::zeros()], &VoxelDvfConfig::default()).is_err());
        let cfg = VoxelDvfConfig {
            k_neighbors: 0,
            ..Default::default()
        };
        assert!(voxel_dvf(&vol, &s, &vec![Vec3::zeros(); s.vertex_count()], &cfg).is_err());
    }
}
