use crate::error::{Error, Result};
use crate::geom::{dist, Vec3};
use crate::mesh::{validate_manifold, Axis, Mesh};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Whole-organ stretch about the bounding-box centre.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum GlobalScale {
    /// Per-axis factors.
    Constant { factors: [f64; 3] },
    /// Cross-section factor varying linearly from `s0` at the low end of
    /// `axis` to `s1` at the high end; coordinates along `axis` are kept.
    Gradient { axis: Axis, s0: f64, s1: f64 },
}

impl GlobalScale {
    pub fn identity() -> Self {
        GlobalScale::Constant { factors: [1.0; 3] }
    }
}

pub fn apply_global_scale(mesh: &Mesh, scale: &GlobalScale) -> Result<Mesh> {
    let bb = mesh.bounding_box()?;
    let c = bb.center();
    match *scale {
        GlobalScale::Constant { factors } => {
            if factors.iter().any(|&f| !(f > 0.0 && f.is_finite())) {
                return Err(Error::InvalidInput(format!("scale factors must be positive, got {factors:?}")));
            }
            let s = Vec3::from(factors);
            mesh.with_vertices(mesh.vertices().iter().map(|v| c + (v - c).component_mul(&s)).collect())
        }
        GlobalScale::Gradient { axis, s0, s1 } => {
            if !(s0 > 0.0 && s1 > 0.0 && s0.is_finite() && s1.is_finite()) {
                return Err(Error::InvalidInput(format!("scale factors must be positive, got {s0}, {s1}")));
            }
            let a = axis.index();
            let (lo, ext) = (bb.min[a], bb.extent()[a]);
            let verts = mesh
                .vertices()
                .iter()
                .map(|v| {
                    let t = if ext > 0.0 { (v[a] - lo) / ext } else { 0.0 };
                    let s = s0 + (s1 - s0) * t;
                    let mut out = c + (v - c) * s;
                    out[a] = v[a];
                    out
                })
                .collect();
            mesh.with_vertices(verts)
        }
    }
}

/// A local dent (`amplitude < 0`) or bulge (`amplitude > 0`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: [f64; 3],
    pub radius: f64,
    pub amplitude: f64,
}

/// Moves vertices within `radius` of `center` along their normals by
/// `amplitude · ½(1 + cos(π d / radius))`. No validity check.
pub fn displace_bump(mesh: &Mesh, bump: &Bump) -> Result<Mesh> {
    if !(bump.radius > 0.0) {
        return Err(Error::InvalidInput(format!("bump radius must be positive, got {}", bump.radius)));
    }
    let c = Vec3::from(bump.center);
    let normals = mesh.vertex_normals();
    let verts = mesh
        .vertices()
        .iter()
        .zip(&normals)
        .map(|(v, n)| {
            let d = dist(v, &c);
            if d < bump.radius {
                v + n * (bump.amplitude * 0.5 * (1.0 + (PI * d / bump.radius).cos()))
            } else {
                *v
            }
        })
        .collect();
    mesh.with_vertices(verts)
}

pub const BUMP_ATTEMPTS: usize = 10;

/// Applies `bump` and checks the result is still an embedded closed manifold.
/// On failure the centre is redrawn from the mesh vertices and the amplitude
/// shrunk, up to [`BUMP_ATTEMPTS`] attempts in total; if all fail the input is
/// returned unchanged with `None`.
pub fn apply_local_bump(mesh: &Mesh, bump: &Bump, seed: u64) -> Result<(Mesh, Option<Bump>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = *bump;
    for _ in 0..BUMP_ATTEMPTS {
        let out = displace_bump(mesh, &b)?;
        if validate_manifold(&out).is_closed_manifold {
            return Ok((out, Some(b)));
        }
        let v = mesh.vertices()[rng.random_range(0..mesh.vertex_count())];
        b = Bump {
            center: [v.x, v.y, v.z],
            radius: b.radius,
            amplitude: b.amplitude * rng.random_range(0.5..1.0),
        };
    }
    Ok((mesh.clone(), None))
}
