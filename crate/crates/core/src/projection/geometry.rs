use super::Geometry;
use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::registry::Registry;
use crate::volume::Grid;
use std::sync::{Arc, OnceLock};

/// Maps a detector pixel to the ray segment traced through the volume.
pub trait RayGeometry: Send + Sync {
    fn name(&self) -> &'static str;

    fn validate(&self, geometry: &Geometry) -> Result<()>;

    /// Segment `(start, end)` for pixel `(row, col)`.
    fn ray(&self, geometry: &Geometry, grid: &Grid, row: usize, col: usize) -> (Vec3, Vec3);
}

fn rotate_z(v: Vec3, angle_deg: f64) -> Vec3 {
    let (s, c) = angle_deg.to_radians().sin_cos();
    Vec3::new(c * v.x - s * v.y, s * v.x + c * v.y, v.z)
}

/// Detector-plane offset of a pixel centre: `(u, 0, v)` before rotation.
fn pixel_offset(geometry: &Geometry, row: usize, col: usize) -> Vec3 {
    let [sr, sc] = geometry.pixel_spacing_mm;
    let u = (col as f64 + 0.5 - geometry.detector_cols as f64 / 2.0) * sc;
    let v = (geometry.detector_rows as f64 / 2.0 - row as f64 - 0.5) * sr;
    Vec3::new(u, 0.0, v)
}

fn grid_center(grid: &Grid) -> Vec3 {
    grid.origin + grid.size() * 0.5
}

/// Parallel rays normal to the detector.
#[derive(Debug, Default)]
pub struct ParallelBeam;

impl RayGeometry for ParallelBeam {
    fn name(&self) -> &'static str {
        "parallel"
    }

    fn validate(&self, _geometry: &Geometry) -> Result<()> {
        Ok(())
    }

    fn ray(&self, geometry: &Geometry, grid: &Grid, row: usize, col: usize) -> (Vec3, Vec3) {
        let centre = grid_center(grid);
        let reach = grid.size().norm() + 1.0;
        let dir = rotate_z(Vec3::new(0.0, 1.0, 0.0), geometry.view_angle_deg);
        let through = centre + rotate_z(pixel_offset(geometry, row, col), geometry.view_angle_deg);
        (through - dir * reach, through + dir * reach)
    }
}

/// Point source on the −y side at `source_to_axis_mm` from the rotation axis;
/// flat detector at `source_to_detector_mm` from the source.
#[derive(Debug, Default)]
pub struct ConeBeam;

impl RayGeometry for ConeBeam {
    fn name(&self) -> &'static str {
        "cone"
    }

    fn validate(&self, g: &Geometry) -> Result<()> {
        if !(g.source_to_axis_mm > 0.0 && g.source_to_detector_mm > g.source_to_axis_mm) {
            return Err(Error::InvalidInput(format!(
                "cone beam needs 0 < SAD < SDD (got {} / {})",
                g.source_to_axis_mm, g.source_to_detector_mm
            )));
        }
        Ok(())
    }

    fn ray(&self, geometry: &Geometry, grid: &Grid, row: usize, col: usize) -> (Vec3, Vec3) {
        let centre = grid_center(grid);
        let a = geometry.view_angle_deg;
        let source = centre + rotate_z(Vec3::new(0.0, -geometry.source_to_axis_mm, 0.0), a);
        let det = Vec3::new(0.0, geometry.source_to_detector_mm - geometry.source_to_axis_mm, 0.0);
        let pixel = centre + rotate_z(det + pixel_offset(geometry, row, col), a);
        (source, pixel)
    }
}

/// Ray geometries by name: `parallel`, `cone`.
pub fn projectors() -> &'static Registry<dyn RayGeometry> {
    static REG: OnceLock<Registry<dyn RayGeometry>> = OnceLock::new();
    REG.get_or_init(|| {
        let mut r: Registry<dyn RayGeometry> = Registry::new("projection mode");
        for g in [Arc::new(ParallelBeam) as Arc<dyn RayGeometry>, Arc::new(ConeBeam)] {
            r.register(g.name(), g);
        }
        r
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_lists_both_modes() {
        assert_eq!(projectors().names(), vec!["cone", "parallel"]);
    }

    #[test]
    fn cone_central_ray_passes_through_centre() {
        let grid = Grid::centered([10, 10, 10], Vec3::new(1.0, 1.0, 1.0), Vec3::new(3.0, 4.0, 5.0)).unwrap();
        let mut g = Geometry::cone_beam();
        g.detector_rows = 2;
        g.detector_cols = 2;
        // The four central pixels straddle the axis symmetrically.
        let (s, p) = ConeBeam.ray(&g, &grid, 0, 0);
        let (_, q) = ConeBeam.ray(&g, &grid, 1, 1);
        let mid = (p + q) * 0.5;
        let c = Vec3::new(3.0, 4.0, 5.0);
        let t = (c - s).cross(&(mid - s));
        assert!(t.norm() < 1e-9);
    }

    #[test]
    fn quarter_turn_rotates_rays() {
        let grid = Grid::centered([10, 10, 10], Vec3::new(1.0, 1.0, 1.0), Vec3::zeros()).unwrap();
        let mut g = Geometry::parallel();
        g.view_angle_deg = 90.0;
        let (a, b) = ParallelBeam.ray(&g, &grid, 96, 128);
        let d = (b - a).normalize();
        assert!((d - Vec3::new(-1.0, 0.0, 0.0)).norm() < 1e-12);
    }
}
