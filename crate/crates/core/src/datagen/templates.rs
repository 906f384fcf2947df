//! Procedural lung templates. Each lung is a star-shaped radial surface, so
//! every resolution is an embedded closed manifold with identical lat-long
//! connectivity across variants of the same resolution.

use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::mesh::{lat_long_surface, Axis, Mesh};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::str::FromStr;

/// The left lung sits at +x in the normalized frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Left, Side::Right];

    pub fn sign(self) -> f64 {
        match self {
            Side::Left => 1.0,
            Side::Right => -1.0,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Side::Left => "l",
            Side::Right => "r",
        }
    }
}

/// Distance of each lung's radial origin from the midline.
pub const CANONICAL_HALF_SEPARATION: f64 = 0.27;

pub fn canonical_center(side: Side) -> Vec3 {
    Vec3::new(side.sign() * CANONICAL_HALF_SEPARATION, 0.0, 0.0)
}

/// Template variants: 0 is the smoother "xcat-like" shape, 1 the narrower,
/// lobulated "ncat-like" shape.
pub const VARIANT_NAMES: [&str; 2] = ["xcat-like", "ncat-like"];

/// Named lat-long resolutions `(rings, segments)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Resolution {
    R1k,
    R2_5k,
    R5k,
    R10k,
    Custom(usize, usize),
}

impl Resolution {
    pub const NAMED: [Resolution; 4] = [Resolution::R1k, Resolution::R2_5k, Resolution::R5k, Resolution::R10k];

    pub fn rings_segments(self) -> (usize, usize) {
        match self {
            Resolution::R1k => (22, 45),
            Resolution::R2_5k => (35, 71),
            Resolution::R5k => (50, 100),
            Resolution::R10k => (71, 141),
            Resolution::Custom(r, s) => (r, s),
        }
    }

    pub fn vertex_count(self) -> usize {
        let (r, s) = self.rings_segments();
        r * s + 2
    }
}

impl FromStr for Resolution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1k" => Ok(Resolution::R1k),
            "2.5k" => Ok(Resolution::R2_5k),
            "5k" => Ok(Resolution::R5k),
            "10k" => Ok(Resolution::R10k),
            other => {
                let parse = |t: &str| t.parse::<usize>().ok();
                match other.split_once('x') {
                    Some((r, s)) => match (parse(r), parse(s)) {
                        (Some(r), Some(s)) if r >= 2 && s >= 3 => Ok(Resolution::Custom(r, s)),
                        _ => Err(Error::InvalidInput(format!("invalid resolution {other:?}"))),
                    },
                    None => Err(Error::InvalidInput(format!(
                        "unknown resolution {other:?} (1k, 2.5k, 5k, 10k or RINGSxSEGMENTS)"
                    ))),
                }
            }
        }
    }
}

struct LungShape {
    half: [f64; 3],
    p_top: f64,
    p_bottom: f64,
    taper: f64,
    medial: f64,
    notch: f64,
    lobes: f64,
    ridges: f64,
}

fn lung_shape(side: Side, variant: usize) -> LungShape {
    let mut s = if variant == 0 {
        LungShape {
            half: [0.235, 0.30, 0.5],
            p_top: 2.0,
            p_bottom: 3.0,
            taper: 0.08,
            medial: 0.35,
            notch: 0.10,
            lobes: 0.0,
            ridges: 0.0,
        }
    } else {
        LungShape {
            half: [0.215, 0.31, 0.5],
            p_top: 2.5,
            p_bottom: 4.5,
            taper: 0.14,
            medial: 0.2,
            notch: 0.05,
            lobes: 0.045,
            ridges: 0.03,
        }
    };
    if side == Side::Right {
        s.half[0] += 0.015;
        s.notch = 0.0;
    }
    s
}

fn radius(shape: &LungShape, side: Side, d: &Vec3) -> f64 {
    let [a, b, c] = shape.half;
    // Exponent blends from the domed apex to the flatter base.
    let p = shape.p_top + (shape.p_bottom - shape.p_top) * 0.5 * (1.0 - (3.0 * d.z).tanh());
    let base = ((d.x / a).abs().powf(p) + (d.y / b).abs().powf(p) + (d.z / c).abs().powf(p)).powf(-1.0 / p);
    let toward_midline = (-side.sign() * d.x).max(0.0);
    let mut f = (1.0 - shape.taper * d.z) * (1.0 - shape.medial * toward_midline.powi(3));
    if shape.notch > 0.0 {
        let d0 = Vec3::new(-side.sign(), -0.6, -0.35).normalize();
        f *= 1.0 - shape.notch * (-(d - d0).norm_squared() / 0.12).exp();
    }
    // Modulations vanish at the poles.
    let w = (1.0 - d.z * d.z).powi(2);
    f *= 1.0 + shape.lobes * w * (2.5 * PI * d.z + 0.4).sin();
    f *= 1.0 + shape.ridges * w * (3.0 * d.y.atan2(d.x)).cos();
    base * f
}

/// Lung template at its canonical position with z extent exactly scaled to 1.
pub fn lung_template(side: Side, variant: usize, resolution: Resolution) -> Result<Mesh> {
    if variant >= VARIANT_NAMES.len() {
        return Err(Error::InvalidInput(format!(
            "template variant {variant} out of range (0..{})",
            VARIANT_NAMES.len()
        )));
    }
    let (rings, segments) = resolution.rings_segments();
    if rings < 2 || segments < 3 {
        return Err(Error::InvalidInput(format!("resolution {rings}x{segments} too coarse")));
    }
    let shape = lung_shape(side, variant);
    let raw = lat_long_surface(rings, segments, |d| d * radius(&shape, side, &d));
    let (unit, _) = raw.scale_normalize(Axis::Z, 1.0)?;
    Ok(unit.translate(&canonical_center(side)))
}

/// Both variants for one side, in variant order.
pub fn template_pool(side: Side, resolution: Resolution) -> Result<Vec<Mesh>> {
    (0..VARIANT_NAMES.len())
        .map(|v| lung_template(side, v, resolution))
        .collect()
}

/// File stem used for shipped templates, e.g. `left_xcat-like`.
pub fn template_name(side: Side, variant: usize) -> String {
    let s = match side {
        Side::Left => "left",
        Side::Right => "right",
    };
    format!("{s}_{}", VARIANT_NAMES[variant])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::validate_manifold;

    #[test]
    fn templates_are_closed_manifolds_with_unit_height() {
        for side in Side::BOTH {
            for v in 0..2 {
                let m = lung_template(side, v, Resolution::R1k).unwrap();
                assert_eq!(m.vertex_count(), Resolution::R1k.vertex_count());
                let r = validate_manifold(&m);
                assert!(r.is_closed_manifold, "{side:?} {v}: {r:?}");
                assert!(m.signed_volume() > 0.0);
                let bb = m.bounding_box().unwrap();
                assert!((bb.extent().z - 1.0).abs() < 1e-12);
                assert!(bb.center().x * side.sign() > 0.15);
            }
        }
    }

    #[test]
    fn pair_fits_normalized_box() {
        let l = lung_template(Side::Left, 0, Resolution::R1k).unwrap().bounding_box().unwrap();
        let r = lung_template(Side::Right, 0, Resolution::R1k).unwrap().bounding_box().unwrap();
        let e = l.union(&r).extent();
        assert!(e.x < 1.2 && e.y < 1.0 && (e.z - 1.0).abs() < 1e-6, "{e:?}");
        assert!(r.max[0] < l.min[0]);
    }

    #[test]
    fn variants_share_connectivity_but_differ() {
        let a = lung_template(Side::Left, 0, Resolution::R1k).unwrap();
        let b = lung_template(Side::Left, 1, Resolution::R1k).unwrap();
        assert_eq!(a.faces(), b.faces());
        assert_ne!(a.vertices(), b.vertices());
        assert!(lung_template(Side::Left, 2, Resolution::R1k).is_err());
    }

    #[test]
    fn resolution_names() {
        assert_eq!("2.5k".parse::<Resolution>().unwrap(), Resolution::R2_5k);
        assert_eq!("12x30".parse::<Resolution>().unwrap(), Resolution::Custom(12, 30));
        assert!("huge".parse::<Resolution>().is_err());
        assert_eq!(Resolution::R10k.vertex_count(), 10013);
    }
}
