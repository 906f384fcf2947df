//! 16-bit binary PGM (P5). The header carries a `# range <min> <max>` comment;
//! samples are big-endian and map linearly onto that range.

use super::{Geometry, ProjectionImage};
use crate::error::{Error, Result};
use std::fs;
use std::path::Path;

const MAXVAL: u32 = 65535;

pub fn save_image(image: &ProjectionImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let (lo, hi) = image.min_max();
    let span = hi - lo;
    let mut buf = format!("P5\n# range {lo:?} {hi:?}\n{} {}\n{MAXVAL}\n", image.width, image.height).into_bytes();
    buf.reserve(2 * image.data.len());
    for &v in &image.data {
        let q = if span > 0.0 {
            ((v - lo) / span * MAXVAL as f64).round() as u16
        } else {
            0
        };
        buf.extend_from_slice(&q.to_be_bytes());
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Reads a P5 image. Without a range comment samples are returned raw.
pub fn load_image(path: impl AsRef<Path>) -> Result<ProjectionImage> {
    let path = path.as_ref();
    let what = path.display().to_string();
    let buf = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut pos = 0;
    let mut range = None;
    let mut fields = Vec::new();
    while fields.len() < 4 {
        while pos < buf.len() && buf[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos >= buf.len() {
            return Err(Error::parse(&what, "truncated PGM header"));
        }
        if buf[pos] == b'#' {
            let end = buf[pos..].iter().position(|&c| c == b'\n').map_or(buf.len(), |e| pos + e);
            let line = String::from_utf8_lossy(&buf[pos + 1..end]);
            let mut toks = line.split_whitespace();
            if toks.next() == Some("range") {
                let lo = toks.next().and_then(|t| t.parse::<f64>().ok());
                let hi = toks.next().and_then(|t| t.parse::<f64>().ok());
                match (lo, hi) {
                    (Some(lo), Some(hi)) if lo <= hi => range = Some((lo, hi)),
                    _ => return Err(Error::parse(&what, "malformed range comment")),
                }
            }
            pos = end;
            continue;
        }
        let start = pos;
        while pos < buf.len() && !buf[pos].is_ascii_whitespace() {
            pos += 1;
        }
        fields.push(String::from_utf8_lossy(&buf[start..pos]).into_owned());
    }
    if fields[0] != "P5" {
        return Err(Error::parse(&what, format!("expected P5 magic, found {:?}", fields[0])));
    }
    let num = |s: &str, name: &str| {
        s.parse::<u32>()
            .map_err(|_| Error::parse(&what, format!("invalid {name} {s:?}")))
    };
    let width = num(&fields[1], "width")? as usize;
    let height = num(&fields[2], "height")? as usize;
    let maxval = num(&fields[3], "maxval")?;
    if maxval == 0 || maxval > MAXVAL {
        return Err(Error::parse(&what, format!("maxval {maxval} out of range")));
    }
    pos += 1;
    let bytes_per = if maxval > 255 { 2 } else { 1 };
    let payload = buf.get(pos..).unwrap_or_default();
    if payload.len() != width * height * bytes_per {
        return Err(Error::parse(&what, "pixel payload length does not match header"));
    }
    let raw: Vec<f64> = if bytes_per == 2 {
        payload.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]]) as f64).collect()
    } else {
        payload.iter().map(|&c| c as f64).collect()
    };
    let data = match range {
        Some((lo, hi)) => raw.iter().map(|q| lo + q / maxval as f64 * (hi - lo)).collect(),
        None => raw,
    };
    let geometry = Geometry {
        detector_rows: height,
        detector_cols: width,
        ..Geometry::default()
    };
    ProjectionImage::new(width, height, data, geometry)
}
