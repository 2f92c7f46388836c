//! Exact kd-tree over a point cloud.
//!
//! Queries are exact: results always equal a brute-force distance scan,
//! sorted by ascending distance with ties broken by ascending point index.

use crate::cloud::PointCloud;
use crate::error::GeomError;
use crate::Vec3;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

const LEAF_SIZE: usize = 16;

#[derive(Debug)]
enum Node {
    Leaf {
        start: u32,
        end: u32,
    },
    Split {
        axis: u8,
        value: f64,
        left: u32,
        right: u32,
    },
}

/// A neighbor returned by a query: point index plus Euclidean distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub distance: f64,
}

impl Neighbor {
    fn key(&self) -> (f64, usize) {
        (self.distance, self.index)
    }
}

impl Eq for Neighbor {}

impl Ord for Neighbor {
    fn cmp(&self, other: &Self) -> Ordering {
        self.distance
            .total_cmp(&other.distance)
            .then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Neighbor {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Immutable spatial index over one cloud's positions.
#[derive(Debug)]
pub struct SpatialIndex {
    points: Vec<Vec3>,
    perm: Vec<u32>,
    nodes: Vec<Node>,
    root: u32,
}

impl SpatialIndex {
    /// Builds the index. Median split on the widest axis; degenerate
    /// ranges (zero extent on every axis) become leaves.
    pub fn build(cloud: &PointCloud) -> Result<Self, GeomError> {
        if cloud.is_empty() {
            return Err(GeomError::EmptyCloud);
        }
        let points: Vec<Vec3> = cloud.points().to_vec();
        let mut perm: Vec<u32> = (0..points.len() as u32).collect();
        let mut nodes = Vec::new();
        let n = perm.len();
        let root = build_node(&points, &mut perm, &mut nodes, 0, n);
        Ok(SpatialIndex {
            points,
            perm,
            nodes,
            root,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The k nearest neighbors of `query`, sorted by (distance, index).
    /// With `exclude_self`, indexed points coinciding with the query
    /// (distance exactly zero) are omitted. Returns fewer than k entries
    /// when the cloud is smaller than k.
    pub fn knn(&self, query: &Vec3, k: usize, exclude_self: bool) -> Vec<Neighbor> {
        if k == 0 {
            return Vec::new();
        }
        // max-heap of the k best so far, keyed by (distance, index)
        let mut heap: BinaryHeap<Neighbor> = BinaryHeap::with_capacity(k + 1);
        self.knn_recurse(self.root, query, k, exclude_self, &mut heap);
        let mut out = heap.into_vec();
        out.sort_unstable();
        out
    }

    fn knn_recurse(
        &self,
        node: u32,
        query: &Vec3,
        k: usize,
        exclude_self: bool,
        heap: &mut BinaryHeap<Neighbor>,
    ) {
        match &self.nodes[node as usize] {
            Node::Leaf { start, end } => {
                for &pi in &self.perm[*start as usize..*end as usize] {
                    let d = (self.points[pi as usize] - query).norm();
                    if exclude_self && d == 0.0 {
                        continue;
                    }
                    let cand = Neighbor {
                        index: pi as usize,
                        distance: d,
                    };
                    if heap.len() < k {
                        heap.push(cand);
                    } else if cand.key() < heap.peek().unwrap().key() {
                        heap.pop();
                        heap.push(cand);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let delta = query[*axis as usize] - value;
                let (near, far) = if delta <= 0.0 {
                    (*left, *right)
                } else {
                    (*right, *left)
                };
                self.knn_recurse(near, query, k, exclude_self, heap);
                // visit the far side unless every point there is strictly
                // worse than the current k-th best; equal distances must be
                // visited for the index tie-break
                if heap.len() < k || delta.abs() <= heap.peek().unwrap().distance {
                    self.knn_recurse(far, query, k, exclude_self, heap);
                }
            }
        }
    }

    /// All points within `radius` of `query`, sorted by (distance, index).
    pub fn radius_query(&self, query: &Vec3, radius: f64) -> Vec<Neighbor> {
        let mut out = Vec::new();
        self.radius_recurse(self.root, query, radius, &mut out);
        out.sort_unstable();
        out
    }

    fn radius_recurse(&self, node: u32, query: &Vec3, radius: f64, out: &mut Vec<Neighbor>) {
        match &self.nodes[node as usize] {
            Node::Leaf { start, end } => {
                for &pi in &self.perm[*start as usize..*end as usize] {
                    let d = (self.points[pi as usize] - query).norm();
                    if d <= radius {
                        out.push(Neighbor {
                            index: pi as usize,
                            distance: d,
                        });
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let delta = query[*axis as usize] - value;
                if delta <= radius {
                    self.radius_recurse(*left, query, radius, out);
                }
                if -delta <= radius {
                    self.radius_recurse(*right, query, radius, out);
                }
            }
        }
    }
}

fn build_node(
    points: &[Vec3],
    perm: &mut [u32],
    nodes: &mut Vec<Node>,
    start: usize,
    end: usize,
) -> u32 {
    let len = end - start;
    if len <= LEAF_SIZE {
        nodes.push(Node::Leaf {
            start: start as u32,
            end: end as u32,
        });
        return (nodes.len() - 1) as u32;
    }
    let slice = &perm[start..end];
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &pi in slice {
        let p = points[pi as usize];
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let axis = (0..3)
        .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
        .unwrap();
    if hi[axis] - lo[axis] == 0.0 {
        // all remaining points coincide; keep them in one leaf
        nodes.push(Node::Leaf {
            start: start as u32,
            end: end as u32,
        });
        return (nodes.len() - 1) as u32;
    }
    let mid = len / 2;
    perm[start..end].select_nth_unstable_by(mid, |&a, &b| {
        points[a as usize][axis]
            .total_cmp(&points[b as usize][axis])
            .then(a.cmp(&b))
    });
    let value = points[perm[start + mid] as usize][axis];
    let placeholder = nodes.len() as u32;
    nodes.push(Node::Leaf { start: 0, end: 0 });
    let left = build_node(points, perm, nodes, start, start + mid);
    let right = build_node(points, perm, nodes, start + mid, end);
    nodes[placeholder as usize] = Node::Split {
        axis: axis as u8,
        value,
        left,
        right,
    };
    placeholder
}
