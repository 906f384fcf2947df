use super::Mesh;
use crate::error::{Error, Result};
use crate::geom::Vec3;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

/// Loads a Wavefront OBJ file (`v` and `f` records; polygons fan-triangulated).
pub fn load_mesh(path: impl AsRef<Path>) -> Result<Mesh> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_obj(&text, &path.display().to_string())
}

/// Parses OBJ text. `source` only labels error messages.
pub fn parse_obj(text: &str, source: &str) -> Result<Mesh> {
    let mut vertices = Vec::new();
    let mut polys: Vec<(usize, Vec<i64>)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        let loc = || format!("{source}:{}", lineno + 1);
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("v") => {
                let mut xyz = [0.0; 3];
                for c in &mut xyz {
                    let t = tok
                        .next()
                        .ok_or_else(|| Error::parse(loc(), "vertex needs 3 coordinates"))?;
                    *c = t
                        .parse()
                        .map_err(|_| Error::parse(loc(), format!("bad coordinate '{t}'")))?;
                }
                vertices.push(Vec3::from(xyz));
            }
            Some("f") => {
                let mut idx = Vec::new();
                for t in tok {
                    let head = t.split('/').next().unwrap_or("");
                    let i: i64 = head
                        .parse()
                        .map_err(|_| Error::parse(loc(), format!("bad face index '{t}'")))?;
                    if i == 0 {
                        return Err(Error::parse(loc(), "face index 0 (OBJ indices are 1-based)"));
                    }
                    idx.push(i);
                }
                if idx.len() < 3 {
                    return Err(Error::parse(loc(), "face needs at least 3 vertices"));
                }
                polys.push((lineno + 1, idx));
            }
            // vn, vt, o, g, s, usemtl, mtllib and blank lines are ignored.
            _ => {}
        }
    }
    let n = vertices.len() as i64;
    let mut faces = Vec::new();
    for (lineno, poly) in polys {
        let resolved: Vec<usize> = poly
            .iter()
            .map(|&i| {
                let r = if i < 0 { n + i } else { i - 1 };
                if r < 0 || r >= n {
                    Err(Error::IndexOutOfRange {
                        index: i.unsigned_abs() as usize,
                        count: n as usize,
                    })
                } else {
                    Ok(r as usize)
                }
            })
            .collect::<Result<_>>()
            .map_err(|e| Error::parse(format!("{source}:{lineno}"), e.to_string()))?;
        for k in 1..resolved.len() - 1 {
            faces.push([resolved[0], resolved[k], resolved[k + 1]]);
        }
    }
    Mesh::new(vertices, faces)
}

/// OBJ text with shortest round-trip float formatting.
pub fn write_obj(mesh: &Mesh) -> String {
    let mut s = String::with_capacity(mesh.vertex_count() * 48 + mesh.face_count() * 24);
    for v in mesh.vertices() {
        let _ = writeln!(s, "v {:?} {:?} {:?}", v.x, v.y, v.z);
    }
    for f in mesh.faces() {
        let _ = writeln!(s, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    s
}

/// Linear blue (t=0) to red (t=1) colormap.
pub fn colormap_blue_red(t: f64) -> [u8; 3] {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let r = (255.0 * t).round() as u8;
    let b = (255.0 * (1.0 - t)).round() as u8;
    [r, 0, b]
}

/// ASCII PLY with per-vertex colour from `scalars` mapped over their
/// `[min, max]` range.
pub fn write_ply_colored(mesh: &Mesh, scalars: &[f64]) -> String {
    let lo = scalars.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = scalars.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let mut s = String::new();
    let _ = write!(
        s,
        "ply\nformat ascii 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\n\
         property uchar red\nproperty uchar green\nproperty uchar blue\nelement face {}\n\
         property list uchar int vertex_indices\nend_header\n",
        mesh.vertex_count(),
        mesh.face_count()
    );
    for (v, &val) in mesh.vertices().iter().zip(scalars) {
        let t = if span > 0.0 { (val - lo) / span } else { 0.0 };
        let [r, g, b] = colormap_blue_red(t);
        let _ = writeln!(s, "{:?} {:?} {:?} {r} {g} {b}", v.x, v.y, v.z);
    }
    for f in mesh.faces() {
        let _ = writeln!(s, "3 {} {} {}", f[0], f[1], f[2]);
    }
    s
}

/// Writes `mesh` as OBJ. With `vertex_scalar`, also writes a coloured PLY
/// next to it (same stem, `.ply` extension).
pub fn save_mesh(mesh: &Mesh, path: impl AsRef<Path>, vertex_scalar: Option<&[f64]>) -> Result<()> {
    let path = path.as_ref();
    if let Some(sc) = vertex_scalar {
        if sc.len() != mesh.vertex_count() {
            return Err(Error::DimensionMismatch(format!(
                "{} scalars for {} vertices",
                sc.len(),
                mesh.vertex_count()
            )));
        }
    }
    fs::write(path, write_obj(mesh)).map_err(|e| Error::io(path, e))?;
    if let Some(sc) = vertex_scalar {
        let ply = path.with_extension("ply");
        fs::write(&ply, write_ply_colored(mesh, sc)).map_err(|e| Error::io(&ply, e))?;
    }
    Ok(())
}
