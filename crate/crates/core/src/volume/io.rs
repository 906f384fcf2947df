//! Volume file: 64-byte little-endian header (`b"ORGV"`, `u32` version,
//! dims as three `u32`, spacing and origin as three `f32` each, zero padding)
//! followed by `f32` voxel values, x fastest.

use super::{Grid, VoxelVolume};
use crate::error::{Error, Result};
use crate::geom::Vec3;
use std::fs;
use std::path::Path;

const MAGIC: &[u8; 4] = b"ORGV";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 64;

pub fn write_volume(path: impl AsRef<Path>, volume: &VoxelVolume) -> Result<()> {
    let path = path.as_ref();
    let g = &volume.grid;
    let mut buf = Vec::with_capacity(HEADER_LEN + 4 * volume.data.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    for d in g.dims {
        buf.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in [g.spacing, g.origin] {
        for c in v.iter() {
            buf.extend_from_slice(&(*c as f32).to_le_bytes());
        }
    }
    buf.resize(HEADER_LEN, 0);
    for x in &volume.data {
        buf.extend_from_slice(&(*x as f32).to_le_bytes());
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn read_volume(path: impl AsRef<Path>) -> Result<VoxelVolume> {
    let path = path.as_ref();
    let what = path.display().to_string();
    let buf = fs::read(path).map_err(|e| Error::io(path, e))?;
    if buf.len() < HEADER_LEN || &buf[..4] != MAGIC {
        return Err(Error::parse(&what, "not an ORGV volume"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(buf[o..o + 4].try_into().expect("4 bytes"));
    let f32_at = |o: usize| f32::from_le_bytes(buf[o..o + 4].try_into().expect("4 bytes")) as f64;
    if u32_at(4) != VERSION {
        return Err(Error::parse(&what, format!("unsupported volume version {}", u32_at(4))));
    }
    let dims = [u32_at(8) as usize, u32_at(12) as usize, u32_at(16) as usize];
    let spacing = Vec3::new(f32_at(20), f32_at(24), f32_at(28));
    let origin = Vec3::new(f32_at(32), f32_at(36), f32_at(40));
    let grid = Grid::new(dims, spacing, origin)?;
    if buf.len() != HEADER_LEN + 4 * grid.len() {
        return Err(Error::parse(&what, "payload length does not match dims"));
    }
    let data = buf[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
        .collect();
    VoxelVolume::from_data(grid, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_at_f32_precision() {
        let g = Grid::new([3, 4, 5], Vec3::new(2.0, 2.0, 1.5), Vec3::new(-3.0, -4.0, -3.75)).unwrap();
        let v = VoxelVolume::from_fn(g, |p| p.x * 0.25 + p.z);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v.orgv");
        write_volume(&p, &v).unwrap();
        assert_eq!(std::fs::metadata(&p).unwrap().len() as usize, 64 + 4 * 60);
        let back = read_volume(&p).unwrap();
        assert_eq!(back.grid, g);
        for (a, b) in back.data.iter().zip(&v.data) {
            assert_eq!(*a, *b as f32 as f64);
        }
    }

    #[test]
    fn truncated_file_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v.orgv");
        std::fs::write(&p, b"ORGV").unwrap();
        assert!(read_volume(&p).is_err());
    }
}
