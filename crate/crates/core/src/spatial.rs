//! Spatial indices: a k-d tree over points and a bounding-volume hierarchy
//! over triangles.
//!
//! Nearest-neighbour results are ordered by `(squared distance, index)`, so
//! ties resolve to the lowest point index, matching a brute-force scan.

use crate::geom::{dist2, point_triangle_dist2, Aabb, Vec3};

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone)]
enum KdNode {
    Leaf {
        lo: usize,
        hi: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

/// Static k-d tree over a borrowed-then-copied point list.
#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Vec3>,
    order: Vec<usize>,
    nodes: Vec<KdNode>,
}

#[inline]
fn key_less(a: (f64, usize), b: (f64, usize)) -> bool {
    a.0 < b.0 || (a.0 == b.0 && a.1 < b.1)
}

impl KdTree {
    pub fn new(points: &[Vec3]) -> Self {
        let mut tree = KdTree {
            points: points.to_vec(),
            order: (0..points.len()).collect(),
            nodes: Vec::new(),
        };
        if !points.is_empty() {
            tree.build(0, points.len());
        }
        tree
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    fn build(&mut self, lo: usize, hi: usize) -> usize {
        let id = self.nodes.len();
        if hi - lo <= LEAF_SIZE {
            self.nodes.push(KdNode::Leaf { lo, hi });
            return id;
        }
        let bb = Aabb::from_points(self.order[lo..hi].iter().map(|&i| &self.points[i]));
        let ext = bb.extent();
        let axis = if ext.x >= ext.y && ext.x >= ext.z {
            0
        } else if ext.y >= ext.z {
            1
        } else {
            2
        };
        let mid = lo + (hi - lo) / 2;
        let pts = &self.points;
        self.order[lo..hi].select_nth_unstable_by(mid - lo, |&a, &b| {
            pts[a][axis].total_cmp(&pts[b][axis])
        });
        let value = self.points[self.order[mid]][axis];
        self.nodes.push(KdNode::Leaf { lo: 0, hi: 0 });
        let left = self.build(lo, mid);
        let right = self.build(mid, hi);
        self.nodes[id] = KdNode::Split {
            axis,
            value,
            left,
            right,
        };
        id
    }

    /// Nearest point to `q`: `(squared distance, index)`.
    pub fn nearest(&self, q: &Vec3) -> Option<(f64, usize)> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = (f64::INFINITY, usize::MAX);
        self.nearest_rec(0, q, &mut best);
        Some(best)
    }

    fn nearest_rec(&self, node: usize, q: &Vec3, best: &mut (f64, usize)) {
        match self.nodes[node] {
            KdNode::Leaf { lo, hi } => {
                for &i in &self.order[lo..hi] {
                    let cand = (dist2(q, &self.points[i]), i);
                    if key_less(cand, *best) {
                        *best = cand;
                    }
                }
            }
            KdNode::Split {
                axis,
                value,
                left,
                right,
            } => {
                let d = q[axis] - value;
                let (near, far) = if d < 0.0 { (left, right) } else { (right, left) };
                self.nearest_rec(near, q, best);
                if d * d <= best.0 {
                    self.nearest_rec(far, q, best);
                }
            }
        }
    }

    /// The `k` nearest points to `q`, sorted by `(squared distance, index)`.
    pub fn knn(&self, q: &Vec3, k: usize) -> Vec<(f64, usize)> {
        let k = k.min(self.points.len());
        let mut out: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
        if k == 0 {
            return out;
        }
        self.knn_rec(0, q, k, &mut out);
        out
    }

    fn knn_rec(&self, node: usize, q: &Vec3, k: usize, out: &mut Vec<(f64, usize)>) {
        match self.nodes[node] {
            KdNode::Leaf { lo, hi } => {
                for &i in &self.order[lo..hi] {
                    let cand = (dist2(q, &self.points[i]), i);
                    if out.len() == k && !key_less(cand, out[k - 1]) {
                        continue;
                    }
                    let pos = out.partition_point(|&e| key_less(e, cand));
                    out.insert(pos, cand);
                    out.truncate(k);
                }
            }
            KdNode::Split {
                axis,
                value,
                left,
                right,
            } => {
                let d = q[axis] - value;
                let (near, far) = if d < 0.0 { (left, right) } else { (right, left) };
                self.knn_rec(near, q, k, out);
                if out.len() < k || d * d <= out[k - 1].0 {
                    self.knn_rec(far, q, k, out);
                }
            }
        }
    }

    /// Indices of all points within `radius` (inclusive) of `q`, unordered.
    pub fn within(&self, q: &Vec3, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        if !self.points.is_empty() {
            self.within_rec(0, q, radius * radius, &mut out);
        }
        out
    }

    fn within_rec(&self, node: usize, q: &Vec3, r2: f64, out: &mut Vec<usize>) {
        match self.nodes[node] {
            KdNode::Leaf { lo, hi } => {
                out.extend(
                    self.order[lo..hi]
                        .iter()
                        .copied()
                        .filter(|&i| dist2(q, &self.points[i]) <= r2),
                );
            }
            KdNode::Split {
                axis,
                value,
                left,
                right,
            } => {
                let d = q[axis] - value;
                let (near, far) = if d < 0.0 { (left, right) } else { (right, left) };
                self.within_rec(near, q, r2, out);
                if d * d <= r2 {
                    self.within_rec(far, q, r2, out);
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
struct BvhNode {
    bounds: Aabb,
    // Leaf when `count > 0`: items `first..first + count` of `items`.
    first: usize,
    count: usize,
    left: usize,
    right: usize,
}

/// Bounding-volume hierarchy over a triangle soup.
#[derive(Debug, Clone)]
pub struct TriangleBvh {
    tris: Vec<[Vec3; 3]>,
    boxes: Vec<Aabb>,
    items: Vec<usize>,
    nodes: Vec<BvhNode>,
}

impl TriangleBvh {
    pub fn new(tris: Vec<[Vec3; 3]>) -> Self {
        let boxes: Vec<Aabb> = tris.iter().map(|t| Aabb::from_points(t.iter())).collect();
        let mut bvh = TriangleBvh {
            items: (0..tris.len()).collect(),
            tris,
            boxes,
            nodes: Vec::new(),
        };
        if !bvh.tris.is_empty() {
            bvh.build(0, bvh.tris.len());
        }
        bvh
    }

    pub fn triangle(&self, i: usize) -> &[Vec3; 3] {
        &self.tris[i]
    }

    pub fn bounds(&self, i: usize) -> &Aabb {
        &self.boxes[i]
    }

    pub fn len(&self) -> usize {
        self.tris.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tris.is_empty()
    }

    fn build(&mut self, lo: usize, hi: usize) -> usize {
        let bounds = self.items[lo..hi]
            .iter()
            .fold(Aabb::empty(), |acc, &i| acc.union(&self.boxes[i]));
        let id = self.nodes.len();
        self.nodes.push(BvhNode {
            bounds,
            first: lo,
            count: hi - lo,
            left: 0,
            right: 0,
        });
        if hi - lo <= 4 {
            return id;
        }
        let ext = bounds.extent();
        let axis = if ext.x >= ext.y && ext.x >= ext.z {
            0
        } else if ext.y >= ext.z {
            1
        } else {
            2
        };
        let mid = lo + (hi - lo) / 2;
        let boxes = &self.boxes;
        self.items[lo..hi].select_nth_unstable_by(mid - lo, |&a, &b| {
            let ca = boxes[a].min[axis] + boxes[a].max[axis];
            let cb = boxes[b].min[axis] + boxes[b].max[axis];
            ca.total_cmp(&cb)
        });
        let left = self.build(lo, mid);
        let right = self.build(mid, hi);
        let node = &mut self.nodes[id];
        node.count = 0;
        node.left = left;
        node.right = right;
        id
    }

    /// Calls `visit` with every triangle whose box overlaps `query`.
    pub fn for_each_overlapping(&self, query: &Aabb, mut visit: impl FnMut(usize)) {
        if self.nodes.is_empty() {
            return;
        }
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            if !node.bounds.overlaps(query) {
                continue;
            }
            if node.count > 0 {
                for &i in &self.items[node.first..node.first + node.count] {
                    if self.boxes[i].overlaps(query) {
                        visit(i);
                    }
                }
            } else {
                stack.push(node.left);
                stack.push(node.right);
            }
        }
    }

    /// Exact squared distance from `p` to the closest triangle.
    pub fn nearest_dist2(&self, p: &Vec3) -> f64 {
        let mut best = f64::INFINITY;
        if self.nodes.is_empty() {
            return best;
        }
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            if node.bounds.dist2_to(p) > best {
                continue;
            }
            if node.count > 0 {
                for &i in &self.items[node.first..node.first + node.count] {
                    let [a, b, c] = &self.tris[i];
                    best = best.min(point_triangle_dist2(p, a, b, c));
                }
            } else {
                let (l, r) = (node.left, node.right);
                let dl = self.nodes[l].bounds.dist2_to(p);
                let dr = self.nodes[r].bounds.dist2_to(p);
                // Visit the closer child first.
                if dl < dr {
                    stack.push(r);
                    stack.push(l);
                } else {
                    stack.push(l);
                    stack.push(r);
                }
            }
        }
        best
    }
}
