//! On-disk basis matrices and displacement files.
//!
//! Basis file (little-endian): `b"ORGB"`, `u32` version, `u64` N, `u64` L,
//! three `u32` degrees, box min and max as six `f64`, then `N·L` `f64`
//! entries row by row. A displacement file is `3L` raw `f64` values.

use super::{embed, BasisMatrix, ControlLattice, Displacement};
use crate::error::{Error, Result};
use crate::geom::Aabb;
use crate::mesh::Mesh;
use nalgebra::DMatrix;
use std::fs;
use std::path::{Path, PathBuf};

pub const CACHE_ENV_VAR: &str = "ORGANFORGE_CACHE";
const BASIS_MAGIC: &[u8; 4] = b"ORGB";
const BASIS_VERSION: u32 = 1;

pub fn write_basis(path: impl AsRef<Path>, basis: &BasisMatrix, lattice: &ControlLattice) -> Result<()> {
    let path = path.as_ref();
    let (n, l) = (basis.source_vertex_count(), basis.lattice_size());
    let mut buf = Vec::with_capacity(80 + n * l * 8);
    buf.extend_from_slice(BASIS_MAGIC);
    buf.extend_from_slice(&BASIS_VERSION.to_le_bytes());
    buf.extend_from_slice(&(n as u64).to_le_bytes());
    buf.extend_from_slice(&(l as u64).to_le_bytes());
    for d in lattice.degrees() {
        buf.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for x in lattice.bounds().min.iter().chain(&lattice.bounds().max) {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    for r in 0..n {
        for c in 0..l {
            buf.extend_from_slice(&basis.entries()[(r, c)].to_le_bytes());
        }
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    what: String,
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let end = self.pos + N;
        if end > self.buf.len() {
            return Err(Error::parse(&self.what, "truncated file"));
        }
        let mut out = [0u8; N];
        out.copy_from_slice(&self.buf[self.pos..end]);
        self.pos = end;
        Ok(out)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take()?))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take()?))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take()?))
    }
}

/// Reads a basis file, returning the matrix and the lattice it was built in.
pub fn read_basis(path: impl AsRef<Path>) -> Result<(BasisMatrix, ControlLattice)> {
    let path = path.as_ref();
    let buf = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = Reader {
        buf: &buf,
        pos: 0,
        what: path.display().to_string(),
    };
    if &r.take::<4>()? != BASIS_MAGIC {
        return Err(Error::parse(&r.what, "bad basis magic"));
    }
    let version = r.u32()?;
    if version != BASIS_VERSION {
        return Err(Error::parse(&r.what, format!("unsupported basis version {version}")));
    }
    let n = r.u64()? as usize;
    let l = r.u64()? as usize;
    let degrees = [r.u32()? as usize, r.u32()? as usize, r.u32()? as usize];
    let mut bb = [0.0; 6];
    for x in &mut bb {
        *x = r.f64()?;
    }
    let lattice = ControlLattice::new(
        Aabb {
            min: [bb[0], bb[1], bb[2]],
            max: [bb[3], bb[4], bb[5]],
        },
        degrees,
    )?;
    if lattice.len() != l {
        return Err(Error::parse(&r.what, "lattice size disagrees with degrees"));
    }
    if buf.len() != r.pos + n * l * 8 {
        return Err(Error::parse(&r.what, "payload length mismatch"));
    }
    let mut data = Vec::with_capacity(n * l);
    for _ in 0..n * l {
        data.push(r.f64()?);
    }
    Ok((BasisMatrix::from_matrix(DMatrix::from_row_slice(n, l, &data)), lattice))
}

pub fn write_displacement(path: impl AsRef<Path>, delta: &Displacement) -> Result<()> {
    let path = path.as_ref();
    let buf: Vec<u8> = delta.to_flat().iter().flat_map(|x| x.to_le_bytes()).collect();
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn read_displacement(path: impl AsRef<Path>) -> Result<Displacement> {
    let path = path.as_ref();
    let buf = fs::read(path).map_err(|e| Error::io(path, e))?;
    if buf.len() % 24 != 0 {
        return Err(Error::parse(
            path.display().to_string(),
            format!("{} bytes is not a whole number of 3D f64 vectors", buf.len()),
        ));
    }
    let flat: Vec<f64> = buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Displacement::from_flat(&flat)
}

fn fnv1a(hash: &mut u64, bytes: &[u8]) {
    for &b in bytes {
        *hash ^= b as u64;
        *hash = hash.wrapping_mul(0x100_0000_01b3);
    }
}

/// Directory of precomputed basis matrices keyed by (vertices, lattice).
#[derive(Debug, Clone)]
pub struct BasisCache {
    dir: PathBuf,
}

impl BasisCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        BasisCache { dir: dir.into() }
    }

    /// Cache rooted at `$ORGANFORGE_CACHE`, if set.
    pub fn from_env() -> Option<Self> {
        std::env::var_os(CACHE_ENV_VAR).map(|d| BasisCache::new(PathBuf::from(d)))
    }

    pub fn key(mesh: &Mesh, lattice: &ControlLattice) -> String {
        let mut h = 0xcbf2_9ce4_8422_2325u64;
        for v in mesh.vertices() {
            for c in v.iter() {
                fnv1a(&mut h, &c.to_le_bytes());
            }
        }
        for d in lattice.degrees() {
            fnv1a(&mut h, &(d as u64).to_le_bytes());
        }
        for x in lattice.bounds().min.iter().chain(&lattice.bounds().max) {
            fnv1a(&mut h, &x.to_le_bytes());
        }
        format!("{h:016x}-{}", mesh.vertex_count())
    }

    pub fn path_for(&self, mesh: &Mesh, lattice: &ControlLattice) -> PathBuf {
        self.dir.join(format!("{}.basis", Self::key(mesh, lattice)))
    }

    /// Loads the cached basis or embeds and stores it.
    pub fn get_or_embed(&self, mesh: &Mesh, lattice: &ControlLattice) -> Result<BasisMatrix> {
        let path = self.path_for(mesh, lattice);
        if let Ok((basis, cached_lattice)) = read_basis(&path) {
            if cached_lattice == *lattice && basis.source_vertex_count() == mesh.vertex_count() {
                return Ok(basis);
            }
        }
        let basis = embed(mesh, lattice)?;
        fs::create_dir_all(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        write_basis(&path, &basis, lattice)?;
        Ok(basis)
    }
}
