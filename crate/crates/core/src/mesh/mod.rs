//! Triangle meshes: representation, OBJ/PLY I/O, manifold validation,
//! area-weighted surface sampling and the rigid/global transforms used to
//! normalize organ pairs.

mod io;
mod manifold;
mod sampling;

pub use io::{colormap_blue_red, load_mesh, parse_obj, save_mesh, write_obj, write_ply_colored};
pub use manifold::{validate_manifold, ManifoldReport};
pub use sampling::sample_surface;

use crate::error::{Error, Result};
use crate::geom::{triangle_area, Aabb, Vec3};
use serde::{Deserialize, Serialize};

/// Triangle mesh with 0-based face indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    vertices: Vec<Vec3>,
    faces: Vec<[usize; 3]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

impl std::str::FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x" | "X" => Ok(Axis::X),
            "y" | "Y" => Ok(Axis::Y),
            "z" | "Z" => Ok(Axis::Z),
            _ => Err(Error::InvalidInput(format!("unknown axis '{s}'"))),
        }
    }
}

impl Mesh {
    /// Builds a mesh, checking that every index is in range and that no face
    /// repeats a vertex.
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let n = vertices.len();
        for f in &faces {
            for &i in f {
                if i >= n {
                    return Err(Error::IndexOutOfRange { index: i, count: n });
                }
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::InvalidInput(format!("face {f:?} repeats a vertex")));
            }
        }
        Ok(Mesh { vertices, faces })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Same connectivity, new vertex positions.
    pub fn with_vertices(&self, vertices: Vec<Vec3>) -> Result<Self> {
        if vertices.len() != self.vertices.len() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} vertices, got {}",
                self.vertices.len(),
                vertices.len()
            )));
        }
        Ok(Mesh {
            vertices,
            faces: self.faces.clone(),
        })
    }

    pub fn triangle(&self, f: usize) -> [Vec3; 3] {
        let [a, b, c] = self.faces[f];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn triangles(&self) -> Vec<[Vec3; 3]> {
        (0..self.faces.len()).map(|f| self.triangle(f)).collect()
    }

    pub fn face_areas(&self) -> Vec<f64> {
        self.faces
            .iter()
            .map(|&[a, b, c]| triangle_area(&self.vertices[a], &self.vertices[b], &self.vertices[c]))
            .collect()
    }

    pub fn surface_area(&self) -> f64 {
        self.face_areas().iter().sum()
    }

    pub fn bounding_box(&self) -> Result<Aabb> {
        if self.vertices.is_empty() {
            return Err(Error::InvalidInput("bounding box of an empty mesh".into()));
        }
        Ok(Aabb::from_points(&self.vertices))
    }

    pub fn translate(&self, t: &Vec3) -> Mesh {
        Mesh {
            vertices: self.vertices.iter().map(|v| v + t).collect(),
            faces: self.faces.clone(),
        }
    }

    /// Divides all coordinates by `extent(axis) / target_extent`; returns the
    /// applied multiplicative scale.
    pub fn scale_normalize(&self, axis: Axis, target_extent: f64) -> Result<(Mesh, f64)> {
        let bb = self.bounding_box()?;
        let ext = bb.extent()[axis.index()];
        if ext <= 0.0 || !ext.is_finite() {
            return Err(Error::Degenerate(format!("zero extent along {axis:?}")));
        }
        let divisor = ext / target_extent;
        let mesh = Mesh {
            vertices: self.vertices.iter().map(|v| v / divisor).collect(),
            faces: self.faces.clone(),
        };
        Ok((mesh, 1.0 / divisor))
    }

    /// Area-weighted vertex normals (unit length; zero for isolated vertices).
    pub fn vertex_normals(&self) -> Vec<Vec3> {
        let mut n = vec![Vec3::zeros(); self.vertices.len()];
        for &[a, b, c] in &self.faces {
            let fnrm = (self.vertices[b] - self.vertices[a]).cross(&(self.vertices[c] - self.vertices[a]));
            n[a] += fnrm;
            n[b] += fnrm;
            n[c] += fnrm;
        }
        for v in &mut n {
            let len = v.norm();
            if len > 0.0 {
                *v /= len;
            }
        }
        n
    }

    /// Signed enclosed volume (positive for outward-facing winding).
    pub fn signed_volume(&self) -> f64 {
        self.faces
            .iter()
            .map(|&[a, b, c]| self.vertices[a].dot(&self.vertices[b].cross(&self.vertices[c])) / 6.0)
            .sum()
    }

    /// Concatenates meshes, offsetting face indices.
    pub fn merge(parts: &[&Mesh]) -> Mesh {
        let mut vertices = Vec::new();
        let mut faces = Vec::new();
        for m in parts {
            let off = vertices.len();
            vertices.extend_from_slice(&m.vertices);
            faces.extend(m.faces.iter().map(|f| [f[0] + off, f[1] + off, f[2] + off]));
        }
        Mesh { vertices, faces }
    }

    /// Splits into face-connected components, each re-indexed, in order of
    /// their lowest vertex index. Vertices not referenced by a face are dropped.
    pub fn connected_components(&self) -> Vec<Mesh> {
        let n = self.vertices.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for f in &self.faces {
            for e in 0..2 {
                let (a, b) = (find(&mut parent, f[e]), find(&mut parent, f[e + 1]));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
        let mut used = vec![false; n];
        for f in &self.faces {
            for &i in f {
                used[i] = true;
            }
        }
        let mut comp_of_root = std::collections::BTreeMap::new();
        let mut remap = vec![usize::MAX; n];
        let mut comps: Vec<(Vec<Vec3>, Vec<[usize; 3]>)> = Vec::new();
        for v in 0..n {
            if !used[v] {
                continue;
            }
            let r = find(&mut parent, v);
            let c = *comp_of_root.entry(r).or_insert_with(|| {
                comps.push((Vec::new(), Vec::new()));
                comps.len() - 1
            });
            remap[v] = comps[c].0.len();
            comps[c].0.push(self.vertices[v]);
        }
        for f in &self.faces {
            let c = comp_of_root[&find(&mut parent, f[0])];
            comps[c].1.push([remap[f[0]], remap[f[1]], remap[f[2]]]);
        }
        comps
            .into_iter()
            .map(|(vertices, faces)| Mesh { vertices, faces })
            .collect()
    }
}

/// Non-empty set of 3D points.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    points: Vec<Vec3>,
}

impl PointSet {
    pub fn new(points: Vec<Vec3>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput("empty point set".into()));
        }
        Ok(PointSet { points })
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn into_points(self) -> Vec<Vec3> {
        self.points
    }

    pub fn translate(&self, t: &Vec3) -> PointSet {
        PointSet {
            points: self.points.iter().map(|p| p + t).collect(),
        }
    }

    pub fn bounding_box(&self) -> Aabb {
        Aabb::from_points(&self.points)
    }
}

impl From<&Mesh> for PointSet {
    /// Vertex set of a non-empty mesh.
    fn from(m: &Mesh) -> Self {
        PointSet {
            points: m.vertices.clone(),
        }
    }
}

/// Closed unit-ish test solids used across the test suites.
pub mod shapes {
    use super::*;

    /// Tetrahedron with outward winding.
    pub fn tetrahedron() -> Mesh {
        Mesh::new(
            vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
                Vec3::new(0.0, 0.0, 1.0),
            ],
            vec![[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]],
        )
        .expect("valid tetrahedron")
    }

    /// Axis-aligned box `[min, max]` as 12 outward-wound triangles.
    pub fn cuboid(min: Vec3, max: Vec3) -> Mesh {
        let v = |x: usize, y: usize, z: usize| {
            Vec3::new(
                if x == 0 { min.x } else { max.x },
                if y == 0 { min.y } else { max.y },
                if z == 0 { min.z } else { max.z },
            )
        };
        let vertices = vec![
            v(0, 0, 0),
            v(1, 0, 0),
            v(1, 1, 0),
            v(0, 1, 0),
            v(0, 0, 1),
            v(1, 0, 1),
            v(1, 1, 1),
            v(0, 1, 1),
        ];
        let faces = vec![
            [0, 3, 2],
            [0, 2, 1],
            [4, 5, 6],
            [4, 6, 7],
            [0, 1, 5],
            [0, 5, 4],
            [3, 7, 6],
            [3, 6, 2],
            [0, 4, 7],
            [0, 7, 3],
            [1, 2, 6],
            [1, 6, 5],
        ];
        Mesh::new(vertices, faces).expect("valid cuboid")
    }

    pub fn unit_cube() -> Mesh {
        cuboid(Vec3::zeros(), Vec3::new(1.0, 1.0, 1.0))
    }

    /// Latitude/longitude sphere with `rings` interior latitude circles and
    /// `segments` vertices per circle.
    pub fn uv_sphere(center: Vec3, radius: f64, rings: usize, segments: usize) -> Mesh {
        super::lat_long_surface(rings, segments, |d| center + d * radius)
    }
}

/// Triangulates a star-shaped closed surface given as a map from unit
/// directions to positions. Produces `rings * segments + 2` vertices with
/// outward winding when the map preserves orientation.
pub fn lat_long_surface(rings: usize, segments: usize, map: impl Fn(Vec3) -> Vec3) -> Mesh {
    assert!(rings >= 1 && segments >= 3);
    let mut vertices = Vec::with_capacity(rings * segments + 2);
    vertices.push(map(Vec3::new(0.0, 0.0, 1.0)));
    for r in 0..rings {
        let theta = std::f64::consts::PI * (r as f64 + 1.0) / (rings as f64 + 1.0);
        let (st, ct) = theta.sin_cos();
        for s in 0..segments {
            let phi = 2.0 * std::f64::consts::PI * s as f64 / segments as f64;
            let (sp, cp) = phi.sin_cos();
            vertices.push(map(Vec3::new(st * cp, st * sp, ct)));
        }
    }
    vertices.push(map(Vec3::new(0.0, 0.0, -1.0)));
    let south = vertices.len() - 1;
    let idx = |r: usize, s: usize| 1 + r * segments + (s % segments);
    let mut faces = Vec::with_capacity(2 * rings * segments);
    for s in 0..segments {
        faces.push([0, idx(0, s), idx(0, s + 1)]);
    }
    for r in 0..rings - 1 {
        for s in 0..segments {
            let (a, b) = (idx(r, s), idx(r, s + 1));
            let (c, d) = (idx(r + 1, s), idx(r + 1, s + 1));
            faces.push([a, c, d]);
            faces.push([a, d, b]);
        }
    }
    for s in 0..segments {
        faces.push([south, idx(rings - 1, s + 1), idx(rings - 1, s)]);
    }
    Mesh { vertices, faces }
}
