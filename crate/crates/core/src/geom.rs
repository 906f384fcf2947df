//! Small geometric primitives shared by every module.

use serde::{Deserialize, Serialize};

pub type Vec3 = nalgebra::Vector3<f64>;

/// Squared Euclidean distance, evaluated as `dx*dx + dy*dy + dz*dz`.
///
/// Nearest-neighbour code and the brute-force oracles both go through this
/// function so their results agree bit for bit.
#[inline]
pub fn dist2(a: &Vec3, b: &Vec3) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    let dz = a.z - b.z;
    dx * dx + dy * dy + dz * dz
}

#[inline]
pub fn dist(a: &Vec3, b: &Vec3) -> f64 {
    dist2(a, b).sqrt()
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Aabb {
            min: [min.x, min.y, min.z],
            max: [max.x, max.y, max.z],
        }
    }

    /// An empty box that any point will expand.
    pub fn empty() -> Self {
        Aabb {
            min: [f64::INFINITY; 3],
            max: [f64::NEG_INFINITY; 3],
        }
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Vec3>) -> Self {
        let mut b = Aabb::empty();
        for p in points {
            b.grow(p);
        }
        b
    }

    pub fn grow(&mut self, p: &Vec3) {
        for a in 0..3 {
            self.min[a] = self.min[a].min(p[a]);
            self.max[a] = self.max[a].max(p[a]);
        }
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        let mut out = *self;
        for a in 0..3 {
            out.min[a] = out.min[a].min(other.min[a]);
            out.max[a] = out.max[a].max(other.max[a]);
        }
        out
    }

    pub fn is_empty(&self) -> bool {
        (0..3).any(|a| self.min[a] > self.max[a])
    }

    pub fn min_v(&self) -> Vec3 {
        Vec3::from(self.min)
    }

    pub fn max_v(&self) -> Vec3 {
        Vec3::from(self.max)
    }

    pub fn center(&self) -> Vec3 {
        Vec3::new(
            0.5 * (self.min[0] + self.max[0]),
            0.5 * (self.min[1] + self.max[1]),
            0.5 * (self.min[2] + self.max[2]),
        )
    }

    pub fn extent(&self) -> Vec3 {
        Vec3::new(
            self.max[0] - self.min[0],
            self.max[1] - self.min[1],
            self.max[2] - self.min[2],
        )
    }

    /// Scales every side about the centre by `factor` (1.05 adds 5% per axis).
    pub fn inflated(&self, factor: f64) -> Aabb {
        let c = self.center();
        let h = self.extent() * (0.5 * factor);
        Aabb::new(c - h, c + h)
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] && p[a] <= self.max[a])
    }

    pub fn overlaps(&self, other: &Aabb) -> bool {
        (0..3).all(|a| self.min[a] <= other.max[a] && other.min[a] <= self.max[a])
    }

    /// Squared distance from `p` to the box (zero inside).
    pub fn dist2_to(&self, p: &Vec3) -> f64 {
        let mut d = 0.0;
        for a in 0..3 {
            let v = if p[a] < self.min[a] {
                self.min[a] - p[a]
            } else if p[a] > self.max[a] {
                p[a] - self.max[a]
            } else {
                0.0
            };
            d += v * v;
        }
        d
    }
}

pub fn triangle_area(a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    0.5 * (b - a).cross(&(c - a)).norm()
}

/// Closest point on triangle `abc` to `p` (Voronoi region classification).
pub fn closest_point_on_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> Vec3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

pub fn point_triangle_dist2(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    let q = closest_point_on_triangle(p, a, b, c);
    dist2(p, &q)
}

/// Signed volume (times six) of the tetrahedron `abcd`.
#[inline]
pub fn orient3d(a: &Vec3, b: &Vec3, c: &Vec3, d: &Vec3) -> f64 {
    (b - a).cross(&(c - a)).dot(&(d - a))
}

#[inline]
fn orient2d(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// Does the closed segment `pq` touch the closed triangle `abc`?
fn segment_hits_triangle(p: &Vec3, q: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> bool {
    let sp = sign(orient3d(a, b, c, p));
    let sq = sign(orient3d(a, b, c, q));
    if sp == 0 && sq == 0 {
        return coplanar_segment_triangle(p, q, a, b, c);
    }
    if sp == sq {
        return false;
    }
    let s1 = sign(orient3d(p, q, a, b));
    let s2 = sign(orient3d(p, q, b, c));
    let s3 = sign(orient3d(p, q, c, a));
    let has_pos = s1 > 0 || s2 > 0 || s3 > 0;
    let has_neg = s1 < 0 || s2 < 0 || s3 < 0;
    !(has_pos && has_neg)
}

fn drop_axis(n: &Vec3) -> (usize, usize) {
    let ax = n.x.abs();
    let ay = n.y.abs();
    let az = n.z.abs();
    if ax >= ay && ax >= az {
        (1, 2)
    } else if ay >= az {
        (0, 2)
    } else {
        (0, 1)
    }
}

fn coplanar_segment_triangle(p: &Vec3, q: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> bool {
    let n = (b - a).cross(&(c - a));
    if n.norm_squared() == 0.0 {
        return false;
    }
    let (i, j) = drop_axis(&n);
    let pr = |v: &Vec3| [v[i], v[j]];
    let (p2, q2, a2, b2, c2) = (pr(p), pr(q), pr(a), pr(b), pr(c));
    if point_in_triangle_2d(p2, a2, b2, c2) || point_in_triangle_2d(q2, a2, b2, c2) {
        return true;
    }
    segments_intersect_2d(p2, q2, a2, b2)
        || segments_intersect_2d(p2, q2, b2, c2)
        || segments_intersect_2d(p2, q2, c2, a2)
}

fn point_in_triangle_2d(p: [f64; 2], a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> bool {
    let d1 = orient2d(a, b, p);
    let d2 = orient2d(b, c, p);
    let d3 = orient2d(c, a, p);
    let has_neg = d1 < 0.0 || d2 < 0.0 || d3 < 0.0;
    let has_pos = d1 > 0.0 || d2 > 0.0 || d3 > 0.0;
    !(has_neg && has_pos)
}

fn segments_intersect_2d(p: [f64; 2], q: [f64; 2], a: [f64; 2], b: [f64; 2]) -> bool {
    let d1 = sign(orient2d(a, b, p));
    let d2 = sign(orient2d(a, b, q));
    let d3 = sign(orient2d(p, q, a));
    let d4 = sign(orient2d(p, q, b));
    if d1 * d2 < 0 && d3 * d4 < 0 {
        return true;
    }
    let on = |u: [f64; 2], v: [f64; 2], w: [f64; 2]| {
        w[0] >= u[0].min(v[0])
            && w[0] <= u[0].max(v[0])
            && w[1] >= u[1].min(v[1])
            && w[1] <= u[1].max(v[1])
    };
    (d1 == 0 && on(a, b, p))
        || (d2 == 0 && on(a, b, q))
        || (d3 == 0 && on(p, q, a))
        || (d4 == 0 && on(p, q, b))
}

/// Triangle–triangle intersection test (touching counts as intersecting).
///
/// Two triangles meet iff an edge of one touches the other triangle, which
/// covers both the crossing and the coplanar-overlap configurations.
pub fn triangles_intersect(t1: [&Vec3; 3], t2: [&Vec3; 3]) -> bool {
    // Quick plane rejection.
    let s: [i8; 3] = [
        sign(orient3d(t1[0], t1[1], t1[2], t2[0])),
        sign(orient3d(t1[0], t1[1], t1[2], t2[1])),
        sign(orient3d(t1[0], t1[1], t1[2], t2[2])),
    ];
    if (s[0] > 0 && s[1] > 0 && s[2] > 0) || (s[0] < 0 && s[1] < 0 && s[2] < 0) {
        return false;
    }
    for e in 0..3 {
        let (p, q) = (t1[e], t1[(e + 1) % 3]);
        if segment_hits_triangle(p, q, t2[0], t2[1], t2[2]) {
            return true;
        }
        let (p, q) = (t2[e], t2[(e + 1) % 3]);
        if segment_hits_triangle(p, q, t1[0], t1[1], t1[2]) {
            return true;
        }
    }
    false
}
