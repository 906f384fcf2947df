//! Trivariate tensor-product Bernstein free-form deformation.
//!
//! A [`ControlLattice`] of `(l+1)(m+1)(n+1)` control points spans an
//! axis-aligned box. Embedding a mesh produces a [`BasisMatrix`] `B` with
//! `V = B P`; displacing the control points by `ΔP` gives `V' = B (P + ΔP)`.
//! Connectivity is never touched, so a deformed closed manifold stays one
//! as long as the map stays injective.
//!
//! Control points are flattened with `i` (the x index) fastest:
//! `idx(i, j, k) = i + (l + 1) * (j + (m + 1) * k)`. A serialized
//! displacement is `3L` floats, `flat[3 * idx + axis]`.

mod cache;

pub use cache::{
    read_basis, read_displacement, write_basis, write_displacement, BasisCache, CACHE_ENV_VAR,
};

use crate::error::{Error, Result};
use crate::geom::{Aabb, Vec3};
use crate::mesh::Mesh;
use nalgebra::DMatrix;
use rayon::prelude::*;

/// Lattice box inflation applied around a template's bounding box.
pub const LATTICE_INFLATION: f64 = 1.05;
/// Default Bernstein degrees: a 4×4×4 grid of 64 control points.
pub const DEFAULT_DEGREES: [usize; 3] = [3, 3, 3];

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    let mut r = 1.0;
    for i in 0..k {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    r
}

/// Bernstein polynomial `C(degree, index) (1-x)^(degree-index) x^index`.
pub fn bernstein(degree: usize, index: usize, x: f64) -> Result<f64> {
    if index > degree {
        return Err(Error::InvalidInput(format!(
            "Bernstein index {index} exceeds degree {degree}"
        )));
    }
    Ok(bernstein_unchecked(degree, index, x))
}

#[inline]
fn bernstein_unchecked(degree: usize, index: usize, x: f64) -> f64 {
    binomial(degree, index) * (1.0 - x).powi((degree - index) as i32) * x.powi(index as i32)
}

fn bernstein_row(degree: usize, x: f64, out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate().take(degree + 1) {
        *o = bernstein_unchecked(degree, i, x);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlLattice {
    degrees: [usize; 3],
    control_points: Vec<Vec3>,
    bounds: Aabb,
}

impl ControlLattice {
    /// Regular lattice over `bounds` with the given Bernstein degrees.
    pub fn new(bounds: Aabb, degrees: [usize; 3]) -> Result<Self> {
        let ext = bounds.extent();
        if bounds.is_empty() || (0..3).any(|a| !(ext[a] > 0.0) || !ext[a].is_finite()) {
            return Err(Error::Degenerate(format!("lattice box {bounds:?}")));
        }
        if degrees.contains(&0) {
            return Err(Error::InvalidInput(format!("lattice degrees {degrees:?} must be >= 1")));
        }
        let [l, m, n] = degrees;
        let min = bounds.min_v();
        let mut control_points = Vec::with_capacity((l + 1) * (m + 1) * (n + 1));
        for k in 0..=n {
            for j in 0..=m {
                for i in 0..=l {
                    let frac = Vec3::new(i as f64 / l as f64, j as f64 / m as f64, k as f64 / n as f64);
                    control_points.push(min + frac.component_mul(&ext));
                }
            }
        }
        Ok(ControlLattice {
            degrees,
            control_points,
            bounds,
        })
    }

    /// Lattice enclosing `mesh` with its bounding box inflated by 5% per axis.
    pub fn around(mesh: &Mesh, degrees: [usize; 3]) -> Result<Self> {
        Self::new(mesh.bounding_box()?.inflated(LATTICE_INFLATION), degrees)
    }

    pub fn degrees(&self) -> [usize; 3] {
        self.degrees
    }

    pub fn bounds(&self) -> &Aabb {
        &self.bounds
    }

    pub fn control_points(&self) -> &[Vec3] {
        &self.control_points
    }

    /// Number of control points `L`.
    pub fn len(&self) -> usize {
        self.control_points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.control_points.is_empty()
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        let [l, m, _] = self.degrees;
        i + (l + 1) * (j + (m + 1) * k)
    }

    /// Local `(s, t, u)` coordinates of `p` in the lattice box.
    pub fn local_coords(&self, p: &Vec3) -> Vec3 {
        let min = self.bounds.min_v();
        (p - min).component_div(&self.bounds.extent())
    }

    fn control_matrix(&self, delta: Option<&Displacement>) -> DMatrix<f64> {
        let l = self.len();
        DMatrix::from_fn(l, 3, |r, c| {
            self.control_points[r][c] + delta.map_or(0.0, |d| d.delta[r][c])
        })
    }
}

/// Dense `N × L` Bernstein tensor matrix of an embedded point set.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisMatrix {
    entries: DMatrix<f64>,
}

impl BasisMatrix {
    pub fn from_matrix(entries: DMatrix<f64>) -> Self {
        BasisMatrix { entries }
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn source_vertex_count(&self) -> usize {
        self.entries.nrows()
    }

    pub fn lattice_size(&self) -> usize {
        self.entries.ncols()
    }
}

/// Control-point displacement `ΔP`: one vector per control point.
#[derive(Debug, Clone, PartialEq)]
pub struct Displacement {
    pub delta: Vec<Vec3>,
}

impl Displacement {
    pub fn zeros(lattice_size: usize) -> Self {
        Displacement {
            delta: vec![Vec3::zeros(); lattice_size],
        }
    }

    pub fn from_flat(flat: &[f64]) -> Result<Self> {
        if !flat.len().is_multiple_of(3) {
            return Err(Error::DimensionMismatch(format!(
                "flat displacement length {} is not a multiple of 3",
                flat.len()
            )));
        }
        let delta: Vec<Vec3> = flat.chunks_exact(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect();
        if delta.iter().any(|d| !d.iter().all(|x| x.is_finite())) {
            return Err(Error::InvalidInput("non-finite displacement".into()));
        }
        Ok(Displacement { delta })
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.delta.iter().flat_map(|d| [d.x, d.y, d.z]).collect()
    }

    pub fn len(&self) -> usize {
        self.delta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delta.is_empty()
    }

    /// Squared Frobenius norm of the `L × 3` array.
    pub fn norm_squared(&self) -> f64 {
        self.delta.iter().map(|d| d.norm_squared()).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.delta.iter().flat_map(|d| d.iter().map(|x| x.abs())).fold(0.0, f64::max)
    }
}

/// Basis matrix of `points` inside `lattice`.
pub fn embed_points(points: &[Vec3], lattice: &ControlLattice) -> Result<BasisMatrix> {
    let [l, m, n] = lattice.degrees;
    let lsize = lattice.len();
    let mut local = Vec::with_capacity(points.len());
    for p in points {
        let st = lattice.local_coords(p);
        if (0..3).any(|a| !(st[a] >= 0.0 && st[a] <= 1.0)) {
            return Err(Error::OutsideLattice { point: [p.x, p.y, p.z] });
        }
        local.push(st);
    }
    let rows: Vec<Vec<f64>> = local
        .par_iter()
        .map(|st| {
            let mut bs = vec![0.0; l + 1];
            let mut bt = vec![0.0; m + 1];
            let mut bu = vec![0.0; n + 1];
            bernstein_row(l, st.x, &mut bs);
            bernstein_row(m, st.y, &mut bt);
            bernstein_row(n, st.z, &mut bu);
            let mut row = vec![0.0; lsize];
            for k in 0..=n {
                for j in 0..=m {
                    let w = bt[j] * bu[k];
                    let base = (l + 1) * (j + (m + 1) * k);
                    for i in 0..=l {
                        row[base + i] = bs[i] * w;
                    }
                }
            }
            row
        })
        .collect();
    let entries = DMatrix::from_fn(points.len(), lsize, |r, c| rows[r][c]);
    Ok(BasisMatrix { entries })
}

pub fn embed(mesh: &Mesh, lattice: &ControlLattice) -> Result<BasisMatrix> {
    embed_points(mesh.vertices(), lattice)
}

/// `V' = B (P + ΔP)`.
pub fn deform(basis: &BasisMatrix, lattice: &ControlLattice, delta: &Displacement) -> Result<Vec<Vec3>> {
    if basis.lattice_size() != lattice.len() || delta.len() != lattice.len() {
        return Err(Error::DimensionMismatch(format!(
            "basis has {} columns, lattice {} points, displacement {} entries",
            basis.lattice_size(),
            lattice.len(),
            delta.len()
        )));
    }
    let moved = &basis.entries * lattice.control_matrix(Some(delta));
    Ok((0..moved.nrows())
        .map(|r| Vec3::new(moved[(r, 0)], moved[(r, 1)], moved[(r, 2)]))
        .collect())
}

/// `V + B ΔP`, equal to [`deform`] when `vertices` are the embedded ones
/// (`B P = V`), and exactly `vertices` at ΔP = 0.
pub fn displace(basis: &BasisMatrix, vertices: &[Vec3], delta: &Displacement) -> Result<Vec<Vec3>> {
    if basis.source_vertex_count() != vertices.len() || delta.len() != basis.lattice_size() {
        return Err(Error::DimensionMismatch(format!(
            "basis is {}x{}, got {} vertices and {} displacements",
            basis.source_vertex_count(),
            basis.lattice_size(),
            vertices.len(),
            delta.len()
        )));
    }
    let d = DMatrix::from_fn(delta.len(), 3, |r, c| delta.delta[r][c]);
    let moved = &basis.entries * d;
    Ok(vertices
        .iter()
        .enumerate()
        .map(|(r, v)| v + Vec3::new(moved[(r, 0)], moved[(r, 1)], moved[(r, 2)]))
        .collect())
}

/// Chain rule through [`deform`]: `Bᵀ G` for a per-vertex gradient `G`.
pub fn grad_wrt_delta(basis: &BasisMatrix, vertex_grad: &[Vec3]) -> Result<Vec<Vec3>> {
    if vertex_grad.len() != basis.source_vertex_count() {
        return Err(Error::DimensionMismatch(format!(
            "{} vertex gradients for a basis over {} vertices",
            vertex_grad.len(),
            basis.source_vertex_count()
        )));
    }
    let g = DMatrix::from_fn(vertex_grad.len(), 3, |r, c| vertex_grad[r][c]);
    let out = basis.entries.tr_mul(&g);
    Ok((0..out.nrows())
        .map(|r| Vec3::new(out[(r, 0)], out[(r, 1)], out[(r, 2)]))
        .collect())
}

/// Applies a lattice displacement to another resolution of the same template,
/// given that resolution's own basis in the same lattice.
pub fn resample(
    template: &Mesh,
    basis: &BasisMatrix,
    lattice: &ControlLattice,
    delta: &Displacement,
) -> Result<Mesh> {
    if basis.source_vertex_count() != template.vertex_count() {
        return Err(Error::DimensionMismatch(format!(
            "basis over {} vertices for a template with {}",
            basis.source_vertex_count(),
            template.vertex_count()
        )));
    }
    template.with_vertices(deform(basis, lattice, delta)?)
}

/// A template mesh embedded in its lattice, ready to deform.
#[derive(Debug, Clone)]
pub struct FfdTemplate {
    pub name: String,
    pub mesh: Mesh,
    pub lattice: ControlLattice,
    pub basis: BasisMatrix,
}

impl FfdTemplate {
    /// Embeds `mesh` in a lattice around its inflated bounding box.
    pub fn new(name: impl Into<String>, mesh: Mesh, degrees: [usize; 3]) -> Result<Self> {
        let lattice = ControlLattice::around(&mesh, degrees)?;
        let basis = embed(&mesh, &lattice)?;
        Ok(FfdTemplate {
            name: name.into(),
            mesh,
            lattice,
            basis,
        })
    }

    /// Like [`FfdTemplate::new`] after moving the bounding-box centre of `mesh`
    /// to the origin.
    pub fn centered(name: impl Into<String>, mesh: Mesh, degrees: [usize; 3]) -> Result<Self> {
        let c = mesh.bounding_box()?.center();
        FfdTemplate::new(name, mesh.translate(&-c), degrees)
    }

    /// Embeds `mesh` in an existing lattice (another resolution of a template).
    pub fn in_lattice(name: impl Into<String>, mesh: Mesh, lattice: ControlLattice) -> Result<Self> {
        let basis = embed(&mesh, &lattice)?;
        Ok(FfdTemplate {
            name: name.into(),
            mesh,
            lattice,
            basis,
        })
    }

    pub fn with_basis(name: impl Into<String>, mesh: Mesh, lattice: ControlLattice, basis: BasisMatrix) -> Result<Self> {
        if basis.source_vertex_count() != mesh.vertex_count() || basis.lattice_size() != lattice.len() {
            return Err(Error::DimensionMismatch("cached basis does not fit template".into()));
        }
        Ok(FfdTemplate {
            name: name.into(),
            mesh,
            lattice,
            basis,
        })
    }

    pub fn lattice_size(&self) -> usize {
        self.lattice.len()
    }

    /// Displacement form of [`deform`]; see [`displace`].
    pub fn deform_vertices(&self, delta: &Displacement) -> Result<Vec<Vec3>> {
        displace(&self.basis, self.mesh.vertices(), delta)
    }

    pub fn deform(&self, delta: &Displacement) -> Result<Mesh> {
        self.mesh.with_vertices(self.deform_vertices(delta)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::shapes::uv_sphere;
    use proptest::prelude::*;

    fn unit_box() -> Aabb {
        Aabb::new(Vec3::zeros(), Vec3::new(1.0, 1.0, 1.0))
    }

    #[test]
    fn bernstein_values() {
        assert_eq!(bernstein(3, 0, 0.0).unwrap(), 1.0);
        assert_eq!(bernstein(3, 1, 0.5).unwrap(), 0.375);
        for x in [0.0, 0.25, 0.7, 1.0] {
            let s: f64 = (0..=3).map(|i| bernstein(3, i, x).unwrap()).sum();
            assert!((s - 1.0).abs() < 1e-15);
        }
        assert!(bernstein(3, 4, 0.5).is_err());
    }

    #[test]
    fn lattice_construction() {
        let lat = ControlLattice::new(unit_box(), DEFAULT_DEGREES).unwrap();
        assert_eq!(lat.len(), 64);
        assert_eq!(lat.control_points()[0], Vec3::zeros());
        assert_eq!(lat.control_points()[lat.index(3, 3, 3)], Vec3::new(1.0, 1.0, 1.0));
        assert_eq!(lat.control_points()[lat.index(1, 0, 0)], Vec3::new(1.0 / 3.0, 0.0, 0.0));

        let lat = ControlLattice::new(unit_box(), [1, 1, 1]).unwrap();
        assert_eq!(lat.len(), 8);
        for p in lat.control_points() {
            assert!(p.iter().all(|&c| c == 0.0 || c == 1.0));
        }

        let flat = Aabb::new(Vec3::zeros(), Vec3::new(1.0, 1.0, 0.0));
        assert!(ControlLattice::new(flat, DEFAULT_DEGREES).is_err());
        assert!(ControlLattice::new(unit_box(), [3, 0, 3]).is_err());
    }

    #[test]
    fn inflated_box_strictly_contains_mesh() {
        let m = uv_sphere(Vec3::new(0.3, -0.2, 0.1), 0.7, 10, 20);
        let lat = ControlLattice::around(&m, DEFAULT_DEGREES).unwrap();
        for v in m.vertices() {
            let st = lat.local_coords(v);
            assert!(st.iter().all(|&c| c > 0.0 && c < 1.0));
        }
    }

    #[test]
    fn embed_endpoint_and_center_rows() {
        let lat = ControlLattice::new(unit_box(), DEFAULT_DEGREES).unwrap();
        let b = embed_points(&[Vec3::zeros()], &lat).unwrap();
        assert_eq!(b.entries()[(0, 0)], 1.0);
        assert_eq!(b.entries().row(0).iter().filter(|&&x| x != 0.0).count(), 1);

        let lat = ControlLattice::new(unit_box(), [1, 1, 1]).unwrap();
        let b = embed_points(&[Vec3::new(0.5, 0.5, 0.5)], &lat).unwrap();
        assert!(b.entries().iter().all(|&x| x == 0.125));

        assert!(matches!(
            embed_points(&[Vec3::new(1.5, 0.5, 0.5)], &lat),
            Err(Error::OutsideLattice { .. })
        ));
    }

    #[test]
    fn zero_and_constant_displacement() {
        let m = uv_sphere(Vec3::new(0.1, 0.2, 0.3), 0.5, 12, 24);
        let t = FfdTemplate::new("s", m.clone(), DEFAULT_DEGREES).unwrap();
        let v0 = t.deform_vertices(&Displacement::zeros(64)).unwrap();
        for (a, b) in v0.iter().zip(m.vertices()) {
            assert!((a - b).norm() < 1e-9);
        }
        let c = Vec3::new(0.3, -0.1, 0.05);
        let v1 = t
            .deform_vertices(&Displacement {
                delta: vec![c; 64],
            })
            .unwrap();
        for (a, b) in v1.iter().zip(&v0) {
            assert!((a - b - c).norm() < 1e-12);
        }
    }

    #[test]
    fn displacement_form_matches_lattice_form() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let m = uv_sphere(Vec3::new(-0.2, 0.1, 0.4), 0.6, 10, 20);
        let t = FfdTemplate::new("s", m.clone(), DEFAULT_DEGREES).unwrap();
        assert_eq!(t.deform(&Displacement::zeros(64)).unwrap(), m);
        let d = Displacement {
            delta: (0..64).map(|_| Vec3::new(rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1))).collect(),
        };
        let a = t.deform_vertices(&d).unwrap();
        let b = deform(&t.basis, &t.lattice, &d).unwrap();
        for (a, b) in a.iter().zip(&b) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn single_vertex_gradient_lands_on_corner() {
        let lat = ControlLattice::new(unit_box(), DEFAULT_DEGREES).unwrap();
        let b = embed_points(&[Vec3::zeros()], &lat).unwrap();
        let g = Vec3::new(1.0, -2.0, 0.5);
        let out = grad_wrt_delta(&b, &[g]).unwrap();
        assert_eq!(out[0], g);
        assert!(out[1..].iter().all(|v| *v == Vec3::zeros()));
        let zero = grad_wrt_delta(&b, &[Vec3::zeros()]).unwrap();
        assert!(zero.iter().all(|v| *v == Vec3::zeros()));
        assert!(grad_wrt_delta(&b, &[g, g]).is_err());
    }

    #[test]
    fn dimension_mismatch_detected() {
        let m = uv_sphere(Vec3::zeros(), 0.5, 6, 12);
        let t = FfdTemplate::new("s", m, DEFAULT_DEGREES).unwrap();
        assert!(t.deform_vertices(&Displacement::zeros(63)).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let m = uv_sphere(Vec3::zeros(), 0.5, 8, 16);
        let t = FfdTemplate::new("s", m, DEFAULT_DEGREES).unwrap();
        let targets: Vec<Vec3> = (0..t.mesh.vertex_count())
            .map(|_| Vec3::new(rng.random(), rng.random(), rng.random()))
            .collect();
        let objective = |d: &Displacement| -> f64 {
            t.deform_vertices(d)
                .unwrap()
                .iter()
                .zip(&targets)
                .map(|(v, q)| (v - q).norm_squared())
                .sum()
        };
        let delta = Displacement {
            delta: (0..64)
                .map(|_| Vec3::new(rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1), 0.0))
                .collect(),
        };
        let v = t.deform_vertices(&delta).unwrap();
        let vg: Vec<Vec3> = v.iter().zip(&targets).map(|(v, q)| 2.0 * (v - q)).collect();
        let g = grad_wrt_delta(&t.basis, &vg).unwrap();
        let h = 1e-4;
        for c in [0, 17, 42, 63] {
            for a in 0..3 {
                let mut p = delta.clone();
                p.delta[c][a] += h;
                let mut q = delta.clone();
                q.delta[c][a] -= h;
                let fd = (objective(&p) - objective(&q)) / (2.0 * h);
                assert!((fd - g[c][a]).abs() <= 1e-5 * fd.abs().max(1.0), "{fd} vs {}", g[c][a]);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn rows_are_a_partition_of_unity(
            pts in prop::collection::vec((0.0f64..=1.0, 0.0f64..=1.0, 0.0f64..=1.0), 1..40),
            l in 1usize..5, m in 1usize..5, n in 1usize..5,
        ) {
            let lat = ControlLattice::new(unit_box(), [l, m, n]).unwrap();
            let pts: Vec<Vec3> = pts.into_iter().map(|(x, y, z)| Vec3::new(x, y, z)).collect();
            let b = embed_points(&pts, &lat).unwrap();
            for r in 0..b.source_vertex_count() {
                let row = b.entries().row(r);
                prop_assert!((row.sum() - 1.0).abs() <= 1e-12);
                prop_assert!(row.iter().all(|&x| (0.0..=1.0).contains(&x)));
            }
        }

        #[test]
        fn deformation_is_affine_in_displacement(
            d1 in prop::collection::vec(-0.1f64..0.1, 192),
            d2 in prop::collection::vec(-0.1f64..0.1, 192),
        ) {
            let m = uv_sphere(Vec3::zeros(), 0.5, 6, 12);
            let t = FfdTemplate::new("s", m, DEFAULT_DEGREES).unwrap();
            let a = Displacement::from_flat(&d1).unwrap();
            let b = Displacement::from_flat(&d2).unwrap();
            let sum: Vec<f64> = d1.iter().zip(&d2).map(|(x, y)| x + y).collect();
            let ab = Displacement::from_flat(&sum).unwrap();
            let v0 = t.deform_vertices(&Displacement::zeros(64)).unwrap();
            let va = t.deform_vertices(&a).unwrap();
            let vb = t.deform_vertices(&b).unwrap();
            let vab = t.deform_vertices(&ab).unwrap();
            for i in 0..v0.len() {
                let lhs = va[i] + vb[i] - 2.0 * v0[i];
                let rhs = vab[i] - v0[i];
                prop_assert!((lhs - rhs).norm() <= 1e-9);
            }
        }
    }
}
