use super::{Mesh, PointSet};
use crate::error::{Error, Result};
use crate::geom::Vec3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Draws `n` points uniformly over the surface area: a face is picked with
/// probability proportional to its area, then a uniform barycentric point.
pub fn sample_surface(mesh: &Mesh, n: usize, seed: u64) -> Result<PointSet> {
    let areas = mesh.face_areas();
    let mut cdf = Vec::with_capacity(areas.len());
    let mut acc = 0.0;
    for a in &areas {
        acc += a;
        cdf.push(acc);
    }
    if !(acc > 0.0) || !acc.is_finite() {
        return Err(Error::Degenerate("mesh has zero surface area".into()));
    }
    if n == 0 {
        return Err(Error::InvalidInput("sample count must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts = (0..n)
        .map(|_| {
            let r = rng.random::<f64>() * acc;
            let f = cdf.partition_point(|&c| c <= r).min(cdf.len() - 1);
            let [a, b, c] = mesh.triangle(f);
            let r1: f64 = rng.random::<f64>().sqrt();
            let r2: f64 = rng.random();
            a * (1.0 - r1) + b * (r1 * (1.0 - r2)) + c * (r1 * r2)
        })
        .collect::<Vec<Vec3>>();
    PointSet::new(pts)
}
