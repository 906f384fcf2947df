use crate::error::{Error, Result};
use crate::geom::{point_triangle_dist2, Aabb, Vec3};
use crate::mesh::{validate_manifold, Mesh};
use crate::volume::Grid;

/// Union bounds are inflated by this factor before voxelizing a pair.
pub const IOU_BOUNDS_INFLATION: f64 = 1.02;
pub const DEFAULT_IOU_RESOLUTION: usize = 64;

/// Binary occupancy on a grid of cubic voxels.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    pub grid: Grid,
    pub occupied: Vec<bool>,
}

impl OccupancyGrid {
    /// Cubic voxels covering `bounds` with `resolution` cells along its longest axis.
    pub fn empty(bounds: &Aabb, resolution: usize) -> Result<Self> {
        if resolution == 0 || bounds.is_empty() {
            return Err(Error::InvalidInput("voxelization needs a positive resolution and non-empty bounds".into()));
        }
        let ext = bounds.extent();
        let h = ext.max() / resolution as f64;
        if !(h > 0.0) {
            return Err(Error::Degenerate("voxelization bounds have zero extent".into()));
        }
        let dims = [0, 1, 2].map(|a| ((ext[a] / h).ceil() as usize).max(1));
        Ok(OccupancyGrid::on_grid(Grid::new(dims, Vec3::new(h, h, h), bounds.min_v())?))
    }

    pub fn on_grid(grid: Grid) -> Self {
        OccupancyGrid {
            occupied: vec![false; grid.len()],
            grid,
        }
    }

    pub fn count(&self) -> usize {
        self.occupied.iter().filter(|&&o| o).count()
    }

    /// Occupied volume in world units.
    pub fn volume(&self) -> f64 {
        self.count() as f64 * self.grid.spacing.product()
    }
}

/// Solid voxelization by parity along +x through voxel-centre rows. Meshes
/// that are not closed manifolds fall back to a surface shell (voxels whose
/// centre lies within half a voxel diagonal of a face) with a warning.
pub fn voxelize(mesh: &Mesh, resolution: usize, bounds: &Aabb) -> Result<OccupancyGrid> {
    voxelize_on_grid(mesh, OccupancyGrid::empty(bounds, resolution)?.grid)
}

/// [`voxelize`] onto an arbitrary grid.
pub fn voxelize_on_grid(mesh: &Mesh, grid: Grid) -> Result<OccupancyGrid> {
    let mut out = OccupancyGrid::on_grid(grid);
    if validate_manifold(mesh).is_closed_manifold {
        fill_parity(mesh, &mut out);
    } else {
        log::warn!("mesh is not a closed manifold; using surface-shell voxelization");
        fill_shell(mesh, &mut out);
    }
    Ok(out)
}

/// Signed doubled area of the yz-projected triangle `(a, b, p)`.
fn edge_fn(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
}

/// Points exactly on an edge belong to the triangle only when the edge is a
/// "top-left" edge of the counter-clockwise triangle, so a ray through a shared
/// edge or vertex is counted exactly once.
fn owns_edge(a: [f64; 2], b: [f64; 2]) -> bool {
    let d = [b[0] - a[0], b[1] - a[1]];
    d[1] < 0.0 || (d[1] == 0.0 && d[0] > 0.0)
}

fn fill_parity(mesh: &Mesh, out: &mut OccupancyGrid) {
    let g = out.grid;
    let [nx, ny, nz] = g.dims;
    let mut crossings: Vec<Vec<f64>> = vec![Vec::new(); ny * nz];
    for tri in mesh.triangles() {
        let mut p = tri.map(|v| [v.y, v.z]);
        let mut area = edge_fn(p[0], p[1], p[2]);
        if area == 0.0 {
            continue;
        }
        let mut t = tri;
        if area < 0.0 {
            p.swap(1, 2);
            t.swap(1, 2);
            area = -area;
        }
        let lo = |ax: usize, v: f64| ((v - g.origin[ax]) / g.spacing[ax] - 0.5).ceil().max(0.0) as usize;
        let hi = |ax: usize, v: f64, n: usize| {
            let f = ((v - g.origin[ax]) / g.spacing[ax] - 0.5).floor();
            if f < 0.0 {
                None
            } else {
                Some((f as usize).min(n - 1))
            }
        };
        let (ymin, ymax) = (p.iter().map(|q| q[0]).fold(f64::INFINITY, f64::min), p.iter().map(|q| q[0]).fold(f64::NEG_INFINITY, f64::max));
        let (zmin, zmax) = (p.iter().map(|q| q[1]).fold(f64::INFINITY, f64::min), p.iter().map(|q| q[1]).fold(f64::NEG_INFINITY, f64::max));
        let (Some(j1), Some(k1)) = (hi(1, ymax, ny), hi(2, zmax, nz)) else {
            continue;
        };
        let (j0, k0) = (lo(1, ymin), lo(2, zmin));
        for k in k0..=k1 {
            for j in j0..=j1 {
                let c = g.center(0, j, k);
                let q = [c.y, c.z];
                let mut w = [0.0; 3];
                let mut inside = true;
                for e in 0..3 {
                    let (a, b) = (p[(e + 1) % 3], p[(e + 2) % 3]);
                    let f = edge_fn(a, b, q);
                    if f < 0.0 || (f == 0.0 && !owns_edge(a, b)) {
                        inside = false;
                        break;
                    }
                    w[e] = f / area;
                }
                if inside {
                    let x = w[0] * t[0].x + w[1] * t[1].x + w[2] * t[2].x;
                    crossings[j + ny * k].push(x);
                }
            }
        }
    }
    for k in 0..nz {
        for j in 0..ny {
            let xs = &mut crossings[j + ny * k];
            xs.sort_by(f64::total_cmp);
            for i in 0..nx {
                let cx = g.center(i, j, k).x;
                let before = xs.partition_point(|&x| x < cx);
                if before % 2 == 1 {
                    out.occupied[g.index(i, j, k)] = true;
                }
            }
        }
    }
}

fn fill_shell(mesh: &Mesh, out: &mut OccupancyGrid) {
    let g = out.grid;
    let half_diag = 0.5 * g.spacing.norm();
    for tri in mesh.triangles() {
        let bb = Aabb::from_points(tri.iter());
        let range = |ax: usize| {
            let lo = ((bb.min[ax] - half_diag - g.origin[ax]) / g.spacing[ax]).floor().max(0.0) as usize;
            let hi = ((bb.max[ax] + half_diag - g.origin[ax]) / g.spacing[ax]).ceil().max(0.0) as usize;
            lo..hi.min(g.dims[ax])
        };
        for k in range(2) {
            for j in range(1) {
                for i in range(0) {
                    let c = g.center(i, j, k);
                    if point_triangle_dist2(&c, &tri[0], &tri[1], &tri[2]) <= half_diag * half_diag {
                        out.occupied[g.index(i, j, k)] = true;
                    }
                }
            }
        }
    }
}

/// `|A ∩ B| / |A ∪ B|`; two empty grids score 1.
pub fn iou(a: &OccupancyGrid, b: &OccupancyGrid) -> Result<f64> {
    if a.grid != b.grid {
        return Err(Error::DimensionMismatch("occupancy grids differ".into()));
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in a.occupied.iter().zip(&b.occupied) {
        inter += (x && y) as usize;
        union += (x || y) as usize;
    }
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

/// Voxelizes both meshes over their shared, slightly inflated bounds.
pub fn mesh_iou(a: &Mesh, b: &Mesh, resolution: usize) -> Result<f64> {
    let bounds = a.bounding_box()?.union(&b.bounding_box()?).inflated(IOU_BOUNDS_INFLATION);
    iou(&voxelize(a, resolution, &bounds)?, &voxelize(b, resolution, &bounds)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::shapes;

    #[test]
    fn cube_volume_close_to_one() {
        let cube = shapes::unit_cube();
        let bounds = cube.bounding_box().unwrap().inflated(1.02);
        let occ = voxelize(&cube, 64, &bounds).unwrap();
        let h = occ.grid.spacing.x;
        assert!((occ.volume() - 1.0).abs() < 6.0 * h, "{}", occ.volume());
    }

    #[test]
    fn sphere_volume_close_to_analytic() {
        let s = shapes::uv_sphere(Vec3::new(0.1, -0.2, 0.3), 1.0, 40, 80);
        let bounds = s.bounding_box().unwrap().inflated(1.02);
        let occ = voxelize(&s, 64, &bounds).unwrap();
        let want = s.signed_volume();
        assert!((occ.volume() - want).abs() / want < 0.03, "{} vs {want}", occ.volume());
    }

    #[test]
    fn identical_and_half_overlapping_cubes() {
        let a = shapes::unit_cube();
        assert_eq!(mesh_iou(&a, &a, 64).unwrap(), 1.0);
        let b = shapes::cuboid(Vec3::new(0.5, 0.0, 0.0), Vec3::new(1.5, 1.0, 1.0));
        let ab = mesh_iou(&a, &b, 64).unwrap();
        // One voxel layer at the boundaries: h ≈ 1.53 / 64.
        assert!((ab - 1.0 / 3.0).abs() < 0.03, "{ab}");
        assert_eq!(ab, mesh_iou(&b, &a, 64).unwrap());
    }

    #[test]
    fn vertex_aligned_rows_counted_once() {
        // Voxel rows pass exactly through shared vertices and edges.
        let cube = shapes::cuboid(Vec3::new(-1.0, -1.0, -1.0), Vec3::new(1.0, 1.0, 1.0));
        let bounds = Aabb::new(Vec3::new(-2.0, -1.5, -1.5), Vec3::new(2.0, 1.5, 1.5));
        let occ = voxelize(&cube, 8, &bounds).unwrap();
        // h = 0.5; centres at ±0.25, ±0.75 lie inside; ±1.25 outside.
        assert_eq!(occ.count(), 4 * 4 * 4);
    }

    #[test]
    fn open_mesh_falls_back_to_shell() {
        let m = Mesh::new(
            vec![Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let bounds = Aabb::new(Vec3::new(-0.1, -0.1, -0.5), Vec3::new(1.1, 1.1, 0.5));
        let occ = voxelize(&m, 16, &bounds).unwrap();
        assert!(occ.count() > 0);
    }
}
