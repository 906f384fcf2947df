use crate::error::{Error, Result};
use crate::geom::dist;
use crate::mesh::PointSet;

/// Minimum-cost perfect matching between equal-size point sets with
/// Euclidean edge costs. Matched costs are summed in ascending order so the
/// result is bitwise symmetric in its arguments.
pub fn emd(p: &PointSet, q: &PointSet) -> Result<f64> {
    let (pp, qq) = (p.points(), q.points());
    if pp.len() != qq.len() {
        return Err(Error::DimensionMismatch(format!(
            "earth mover's distance needs equal sizes, got {} and {}",
            pp.len(),
            qq.len()
        )));
    }
    let n = pp.len();
    let cost: Vec<f64> = pp.iter().flat_map(|a| qq.iter().map(move |b| dist(a, b))).collect();
    let assign = min_cost_assignment(n, &cost);
    Ok(ordered_sum((0..n).map(|i| cost[i * n + assign[i]]).collect()))
}

fn ordered_sum(mut terms: Vec<f64>) -> f64 {
    terms.sort_by(f64::total_cmp);
    terms.iter().sum()
}

/// Shortest-augmenting-path Hungarian method on a dense `n × n` row-major
/// cost matrix. Returns `assign[row] = col`. O(n³).
pub fn min_cost_assignment(n: usize, cost: &[f64]) -> Vec<usize> {
    debug_assert_eq!(cost.len(), n * n);
    // 1-based potentials; column 0 is the virtual source.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0f64; n + 1];
    let mut used = vec![false; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        minv.fill(f64::INFINITY);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0usize; n];
    for j in 1..=n {
        if row_of[j] > 0 {
            assign[row_of[j] - 1] = j - 1;
        }
    }
    assign
}
