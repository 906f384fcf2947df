use super::Mesh;
use crate::geom::triangles_intersect;
use crate::spatial::TriangleBvh;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};

/// Result of [`validate_manifold`]. The mesh is a closed manifold exactly
/// when every count is zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifoldReport {
    pub is_closed_manifold: bool,
    /// Edges shared by more than two faces.
    pub non_manifold_edge_count: usize,
    /// Edges used by a single face.
    pub boundary_edge_count: usize,
    /// Pairs of faces without a shared vertex whose triangles touch.
    pub self_intersection_count: usize,
    /// Vertices bitwise equal to an earlier vertex.
    pub duplicate_vertex_count: usize,
    /// Two-face edges traversed in the same direction by both faces.
    pub inconsistent_winding_count: usize,
}

pub fn validate_manifold(mesh: &Mesh) -> ManifoldReport {
    // Directed-edge use counts per undirected edge: (forward, backward).
    let mut edges: HashMap<(usize, usize), (u32, u32)> = HashMap::with_capacity(mesh.face_count() * 2);
    for f in mesh.faces() {
        for e in 0..3 {
            let (a, b) = (f[e], f[(e + 1) % 3]);
            let entry = edges.entry((a.min(b), a.max(b))).or_insert((0, 0));
            if a < b {
                entry.0 += 1;
            } else {
                entry.1 += 1;
            }
        }
    }
    let mut boundary = 0;
    let mut non_manifold = 0;
    let mut winding = 0;
    for &(fwd, bwd) in edges.values() {
        match fwd + bwd {
            1 => boundary += 1,
            2 => {
                if fwd != 1 {
                    winding += 1;
                }
            }
            _ => non_manifold += 1,
        }
    }

    let mut seen = HashSet::with_capacity(mesh.vertex_count());
    let duplicates = mesh
        .vertices()
        .iter()
        .filter(|v| !seen.insert([v.x.to_bits(), v.y.to_bits(), v.z.to_bits()]))
        .count();

    let intersections = count_self_intersections(mesh);

    ManifoldReport {
        is_closed_manifold: boundary == 0
            && non_manifold == 0
            && intersections == 0
            && duplicates == 0
            && winding == 0,
        non_manifold_edge_count: non_manifold,
        boundary_edge_count: boundary,
        self_intersection_count: intersections,
        duplicate_vertex_count: duplicates,
        inconsistent_winding_count: winding,
    }
}

fn share_vertex(a: &[usize; 3], b: &[usize; 3]) -> bool {
    a.iter().any(|i| b.contains(i))
}

/// Counts intersecting pairs of non-adjacent faces; AABB-tree culled.
pub(crate) fn count_self_intersections(mesh: &Mesh) -> usize {
    let faces = mesh.faces();
    let bvh = TriangleBvh::new(mesh.triangles());
    (0..faces.len())
        .into_par_iter()
        .map(|i| {
            let ti = bvh.triangle(i);
            let mut hits = 0;
            bvh.for_each_overlapping(bvh.bounds(i), |j| {
                if j <= i || share_vertex(&faces[i], &faces[j]) {
                    return;
                }
                let tj = bvh.triangle(j);
                if triangles_intersect([&ti[0], &ti[1], &ti[2]], [&tj[0], &tj[1], &tj[2]]) {
                    hits += 1;
                }
            });
            hits
        })
        .sum()
}
