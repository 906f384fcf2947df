use crate::geom::Vec3;
use crate::volume::VoxelVolume;

/// Per-axis crossing schedule: the next plane parameter and its increment.
struct AxisWalk {
    next: f64,
    step: f64,
    remaining: usize,
}

impl AxisWalk {
    fn peek(&self) -> f64 {
        if self.remaining == 0 {
            f64::INFINITY
        } else {
            self.next
        }
    }

    fn advance(&mut self) {
        self.remaining -= 1;
        self.next += self.step;
    }
}

/// Exact line integral of the piecewise-constant volume along segment `a → b`,
/// in volume units × mm. Zero when the segment misses the grid.
///
/// Parametric Siddon traversal: the sorted union of plane-crossing
/// parameters splits the segment into pieces lying inside single voxels;
/// each piece contributes its length times that voxel's value.
pub fn siddon_integral(volume: &VoxelVolume, a: &Vec3, b: &Vec3) -> f64 {
    let grid = &volume.grid;
    let d = b - a;
    let length = d.norm();
    if length == 0.0 {
        return 0.0;
    }
    let (mut amin, mut amax) = (0.0f64, 1.0f64);
    for ax in 0..3 {
        let lo = grid.origin[ax];
        let hi = lo + grid.spacing[ax] * grid.dims[ax] as f64;
        if d[ax] == 0.0 {
            if a[ax] <= lo || a[ax] >= hi {
                return 0.0;
            }
            continue;
        }
        let t0 = (lo - a[ax]) / d[ax];
        let t1 = (hi - a[ax]) / d[ax];
        amin = amin.max(t0.min(t1));
        amax = amax.min(t0.max(t1));
    }
    if amin >= amax {
        return 0.0;
    }

    // Plane crossings strictly inside (amin, amax), per axis, in increasing order.
    let walks: Vec<AxisWalk> = (0..3)
        .map(|ax| {
            if d[ax] == 0.0 {
                return AxisWalk {
                    next: f64::INFINITY,
                    step: 0.0,
                    remaining: 0,
                };
            }
            let s = grid.spacing[ax];
            let n = grid.dims[ax] as f64;
            let plane_at = |t: f64| (a[ax] + t * d[ax] - grid.origin[ax]) / s;
            let (p_in, p_out) = (plane_at(amin), plane_at(amax));
            let (first, last, dir) = if d[ax] > 0.0 {
                ((p_in.floor() + 1.0).max(1.0), p_out.ceil().min(n) - 1.0, 1.0)
            } else {
                ((p_in.ceil() - 1.0).min(n - 1.0), p_out.floor().max(0.0) + 1.0, -1.0)
            };
            let count = ((last - first) * dir + 1.0).max(0.0) as usize;
            let param = |plane: f64| (grid.origin[ax] + plane * s - a[ax]) / d[ax];
            AxisWalk {
                next: param(first),
                step: dir * s / d[ax],
                remaining: count,
            }
        })
        .collect();
    let mut walks: [AxisWalk; 3] = walks.try_into().ok().expect("three axes");

    let mut total = 0.0;
    let mut prev = amin;
    loop {
        let (ax, t) = (0..3)
            .map(|i| (i, walks[i].peek()))
            .fold((3, amax), |best, cur| if cur.1 < best.1 { cur } else { best });
        let t = t.min(amax);
        if t > prev {
            total += segment(volume, a, &d, prev, t) * (t - prev);
            prev = t;
        }
        if ax == 3 {
            break;
        }
        walks[ax].advance();
    }
    total * length
}

/// Value of the voxel containing the segment midpoint.
fn segment(volume: &VoxelVolume, a: &Vec3, d: &Vec3, t0: f64, t1: f64) -> f64 {
    let grid = &volume.grid;
    let mid = a + d * (0.5 * (t0 + t1));
    let mut ijk = [0usize; 3];
    for ax in 0..3 {
        let f = ((mid[ax] - grid.origin[ax]) / grid.spacing[ax]).floor();
        ijk[ax] = (f.max(0.0) as usize).min(grid.dims[ax] - 1);
    }
    volume.get(ijk[0], ijk[1], ijk[2])
}
