//! Exact nearest-neighbour k-d tree over points of any fixed dimension.
//!
//! All queries are exact. Equal distances resolve to the lower stored
//! index, so results never depend on tree shape.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::types::{FeatureMatrix, Point3};

const LEAF_SIZE: usize = 12;

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

#[derive(Debug, Clone)]
pub struct SpatialIndex {
    dim: usize,
    // Coordinates laid out in slot (leaf) order.
    coords: Vec<f64>,
    ids: Vec<usize>,
    nodes: Vec<Node>,
}

impl SpatialIndex {
    /// Builds from a flat row-major coordinate buffer of `coords.len() / dim` points.
    pub fn build(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("spatial index dimension must be positive".into()));
        }
        if coords.is_empty() {
            return Err(Error::Empty("spatial index input"));
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: coords.len() % dim,
            });
        }
        if let Some(i) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFinite {
                row: i / dim,
                col: i % dim,
            });
        }
        let n = coords.len() / dim;
        let mut ids: Vec<usize> = (0..n).collect();
        let mut nodes = Vec::with_capacity(2 * n / LEAF_SIZE + 1);
        build_node(dim, &coords, &mut ids, 0, &mut nodes);
        let mut slotted = Vec::with_capacity(coords.len());
        for &id in &ids {
            slotted.extend_from_slice(&coords[id * dim..(id + 1) * dim]);
        }
        Ok(Self {
            dim,
            coords: slotted,
            ids,
            nodes,
        })
    }

    pub fn from_points(points: &[Point3]) -> Result<Self> {
        Self::build(3, points.iter().flat_map(|p| p.to_array()).collect())
    }

    /// Builds over the listed points, so stored index `i` refers to `subset[i]`.
    pub fn from_point_subset(points: &[Point3], subset: &[usize]) -> Result<Self> {
        Self::build(3, subset.iter().flat_map(|&i| points[i].to_array()).collect())
    }

    /// Builds over the listed feature rows.
    pub fn from_feature_rows(features: &FeatureMatrix, rows: &[usize]) -> Result<Self> {
        let mut coords = Vec::with_capacity(rows.len() * features.cols());
        for &r in rows {
            if r >= features.rows() {
                return Err(Error::IndexOutOfRange {
                    index: r,
                    len: features.rows(),
                });
            }
            coords.extend(features.row(r).iter().map(|&v| f64::from(v)));
        }
        Self::build(features.cols(), coords)
    }

    /// Builds from a sequence of equal-length coordinate vectors.
    pub fn from_vectors<V: AsRef<[f64]>>(vectors: &[V]) -> Result<Self> {
        let dim = vectors
            .first()
            .map(|v| v.as_ref().len())
            .ok_or(Error::Empty("spatial index input"))?;
        let mut coords = Vec::with_capacity(vectors.len() * dim);
        for v in vectors {
            let v = v.as_ref();
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: v.len(),
                });
            }
            coords.extend_from_slice(v);
        }
        Self::build(dim, coords)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Index and squared distance of the nearest stored point.
    pub fn nearest(&self, query: &[f64]) -> (usize, f64) {
        assert_eq!(query.len(), self.dim, "query dimension");
        let mut best = (f64::INFINITY, usize::MAX);
        self.nearest_rec(0, query, &mut best);
        (best.1, best.0)
    }

    pub fn nearest_point(&self, p: &Point3) -> (usize, f64) {
        self.nearest(&p.to_array())
    }

    /// The `k` nearest stored points ordered by (distance, index).
    pub fn k_nearest(&self, query: &[f64], k: usize) -> Vec<(usize, f64)> {
        assert_eq!(query.len(), self.dim, "query dimension");
        let k = k.min(self.len());
        if k == 0 {
            return Vec::new();
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.knn_rec(0, query, k, &mut heap);
        let mut out: Vec<_> = heap.into_iter().map(|c| (c.id, c.dist)).collect();
        out.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        out
    }

    /// Every stored point within `radius` (inclusive), in ascending index order.
    pub fn within_radius(&self, query: &[f64], radius: f64) -> Vec<usize> {
        assert_eq!(query.len(), self.dim, "query dimension");
        let mut out = Vec::new();
        self.radius_rec(0, query, radius * radius, &mut out);
        out.sort_unstable();
        out
    }

    fn point(&self, slot: usize) -> &[f64] {
        &self.coords[slot * self.dim..(slot + 1) * self.dim]
    }

    fn nearest_rec(&self, node: usize, q: &[f64], best: &mut (f64, usize)) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for slot in start..end {
                    let d = sq_dist(q, self.point(slot));
                    let id = self.ids[slot];
                    if d < best.0 || (d == best.0 && id < best.1) {
                        *best = (d, id);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.nearest_rec(near, q, best);
                if diff * diff <= best.0 {
                    self.nearest_rec(far, q, best);
                }
            }
        }
    }

    fn knn_rec(&self, node: usize, q: &[f64], k: usize, heap: &mut BinaryHeap<Candidate>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for slot in start..end {
                    let c = Candidate {
                        dist: sq_dist(q, self.point(slot)),
                        id: self.ids[slot],
                    };
                    if heap.len() < k {
                        heap.push(c);
                    } else if c < *heap.peek().expect("heap is full") {
                        heap.pop();
                        heap.push(c);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.knn_rec(near, q, k, heap);
                let visit = heap.len() < k || diff * diff <= heap.peek().map_or(f64::INFINITY, |c| c.dist);
                if visit {
                    self.knn_rec(far, q, k, heap);
                }
            }
        }
    }

    fn radius_rec(&self, node: usize, q: &[f64], r2: f64, out: &mut Vec<usize>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for slot in start..end {
                    if sq_dist(q, self.point(slot)) <= r2 {
                        out.push(self.ids[slot]);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.radius_rec(near, q, r2, out);
                if diff * diff <= r2 {
                    self.radius_rec(far, q, r2, out);
                }
            }
        }
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        s += d * d;
    }
    s
}

// Max-heap ordering on (distance, id): the top is the current worst.
#[derive(Debug, Clone, Copy)]
struct Candidate {
    dist: f64,
    id: usize,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist
            .total_cmp(&other.dist)
            .then(self.id.cmp(&other.id))
    }
}

fn build_node(dim: usize, coords: &[f64], ids: &mut [usize], offset: usize, nodes: &mut Vec<Node>) -> usize {
    let at = nodes.len();
    if ids.len() <= LEAF_SIZE {
        nodes.push(Node::Leaf {
            start: offset,
            end: offset + ids.len(),
        });
        return at;
    }
    let (axis, width) = widest_axis(dim, coords, ids);
    if width == 0.0 {
        // All points coincide; splitting cannot separate them.
        nodes.push(Node::Leaf {
            start: offset,
            end: offset + ids.len(),
        });
        return at;
    }
    let c = |id: usize| coords[id * dim + axis];
    let mid = ids.len() / 2;
    ids.select_nth_unstable_by(mid, |&a, &b| c(a).total_cmp(&c(b)).then(a.cmp(&b)));
    let value = c(ids[mid]);
    nodes.push(Node::Leaf { start: 0, end: 0 });
    let (lo, hi) = ids.split_at_mut(mid);
    let left = build_node(dim, coords, lo, offset, nodes);
    let right = build_node(dim, coords, hi, offset + mid, nodes);
    nodes[at] = Node::Split {
        axis,
        value,
        left,
        right,
    };
    at
}

fn spread(dim: usize, coords: &[f64], ids: &[usize], axis: usize) -> f64 {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &id in ids {
        let v = coords[id * dim + axis];
        lo = lo.min(v);
        hi = hi.max(v);
    }
    hi - lo
}

fn widest_axis(dim: usize, coords: &[f64], ids: &[usize]) -> (usize, f64) {
    (0..dim)
        .map(|a| (a, spread(dim, coords, ids, a)))
        .fold((0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best })
}
