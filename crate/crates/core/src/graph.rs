//! Directed neighborhood graphs: the k-NN baseline, the geometrically
//! constrained greedy construction, and coverage statistics.

use crate::cloud::PointCloud;
use crate::error::GeomError;
use crate::kdtree::SpatialIndex;
use crate::Vec3;

/// Which construction produced a graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphMode {
    Knn,
    Constrained,
}

impl GraphMode {
    pub fn name(&self) -> &'static str {
        match self {
            GraphMode::Knn => "knn",
            GraphMode::Constrained => "constrained",
        }
    }
}

/// Parameters of the constrained construction.
///
/// Once a neighbor y of x is selected, later candidates z with
/// angle(z-x, y-x) < theta and |z-x| < lambda*|y-x| are excluded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintParams {
    /// Exclusion cone half-angle, radians, in (0, pi).
    pub theta: f64,
    /// Exclusion distance multiplier, >= 1.
    pub lambda: f64,
    /// Candidate pool size is `candidate_multiplier * k` nearest neighbors.
    pub candidate_multiplier: usize,
}

impl Default for ConstraintParams {
    fn default() -> Self {
        ConstraintParams {
            theta: std::f64::consts::FRAC_PI_6,
            lambda: 1.25,
            candidate_multiplier: 4,
        }
    }
}

impl ConstraintParams {
    pub fn validate(&self) -> Result<(), GeomError> {
        if !(self.theta >= 0.0 && self.theta < std::f64::consts::PI) {
            return Err(GeomError::InvalidParam(
                "theta must be in [0, pi)".into(),
            ));
        }
        if self.lambda < 1.0 {
            return Err(GeomError::InvalidParam("lambda must be >= 1".into()));
        }
        if self.candidate_multiplier == 0 {
            return Err(GeomError::InvalidParam(
                "candidate_multiplier must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Directed graph: per-vertex ordered out-edge lists. Edge order is the
/// selection order of the construction.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborGraph {
    edges: Vec<Vec<usize>>,
    pub k_target: usize,
    pub mode: GraphMode,
    pub params: Option<ConstraintParams>,
}

impl NeighborGraph {
    /// Assembles a graph from prebuilt edge lists (test fixtures,
    /// deserialization).
    pub fn from_edges(
        edges: Vec<Vec<usize>>,
        k_target: usize,
        mode: GraphMode,
        params: Option<ConstraintParams>,
    ) -> Self {
        NeighborGraph {
            edges,
            k_target,
            mode,
            params,
        }
    }

    pub fn num_vertices(&self) -> usize {
        self.edges.len()
    }

    pub fn out_neighbors(&self, vertex: usize) -> &[usize] {
        &self.edges[vertex]
    }

    pub fn out_edges(&self) -> &[Vec<usize>] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.iter().map(Vec::len).sum()
    }
}

/// Baseline: directed edges from each point to its k nearest neighbors,
/// ascending by distance. Degree saturates at N-1.
pub fn build_knn_graph(
    cloud: &PointCloud,
    index: &SpatialIndex,
    k: usize,
) -> Result<NeighborGraph, GeomError> {
    if cloud.len() < 2 {
        return Err(GeomError::Degenerate("graph needs at least 2 points".into()));
    }
    if k == 0 {
        return Err(GeomError::InvalidParam("k must be >= 1".into()));
    }
    let edges = cloud
        .points()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            index
                .knn(p, k + 1, false)
                .into_iter()
                .filter(|nb| nb.index != i)
                .take(k)
                .map(|nb| nb.index)
                .collect()
        })
        .collect();
    Ok(NeighborGraph {
        edges,
        k_target: k,
        mode: GraphMode::Knn,
        params: None,
    })
}

/// True when candidate z is inside the exclusion region of an already
/// selected neighbor y (both relative to x): angle < theta AND
/// distance < lambda * |y - x|. Strict inequalities; boundary survives.
pub fn excluded_by(
    x: &Vec3,
    selected: &Vec3,
    candidate: &Vec3,
    theta: f64,
    lambda: f64,
) -> bool {
    let dy = selected - x;
    let dz = candidate - x;
    let (ny, nz) = (dy.norm(), dz.norm());
    if ny == 0.0 || nz == 0.0 {
        return false;
    }
    if dz.norm() >= lambda * ny {
        return false;
    }
    let cos = (dy.dot(&dz) / (ny * nz)).clamp(-1.0, 1.0);
    cos.acos() < theta
}

/// Greedy geometrically constrained construction. Per vertex: scan the
/// sorted nearest candidates, starting from a pool of m*k, selecting each
/// candidate not excluded by an earlier selection. The pool doubles and
/// the scan continues whenever it runs out before k selections; only
/// once the whole cloud is exhausted does the construction top up with
/// the nearest excluded candidates.
pub fn build_constrained_graph(
    cloud: &PointCloud,
    index: &SpatialIndex,
    k: usize,
    params: &ConstraintParams,
) -> Result<NeighborGraph, GeomError> {
    if cloud.len() < 2 {
        return Err(GeomError::Degenerate("graph needs at least 2 points".into()));
    }
    if k == 0 {
        return Err(GeomError::InvalidParam("k must be >= 1".into()));
    }
    params.validate()?;
    let mut edges = Vec::with_capacity(cloud.len());
    for (i, p) in cloud.points().iter().enumerate() {
        let mut pool_size = params.candidate_multiplier * k;
        let mut selected: Vec<usize> = Vec::with_capacity(k);
        let mut excluded: Vec<usize> = Vec::new();
        let mut scanned = 0usize;
        loop {
            let pool: Vec<usize> = index
                .knn(p, pool_size + 1, false)
                .into_iter()
                .filter(|nb| nb.index != i && nb.distance > 0.0)
                .take(pool_size)
                .map(|nb| nb.index)
                .collect();
            let exhausted = pool_size + 1 >= cloud.len();
            for &cand in &pool[scanned..] {
                if selected.len() == k {
                    break;
                }
                let blocked = selected.iter().any(|&s| {
                    excluded_by(
                        p,
                        &cloud.point(s),
                        &cloud.point(cand),
                        params.theta,
                        params.lambda,
                    )
                });
                if blocked {
                    excluded.push(cand);
                } else {
                    selected.push(cand);
                }
            }
            scanned = pool.len();
            if selected.len() == k || exhausted {
                break;
            }
            pool_size *= 2;
        }
        // the cloud itself ran out of admissible candidates: top up from
        // the nearest excluded ones (already in ascending distance order)
        let mut topup = excluded.into_iter();
        while selected.len() < k {
            match topup.next() {
                Some(cand) => selected.push(cand),
                None => break,
            }
        }
        edges.push(selected);
    }
    Ok(NeighborGraph {
        edges,
        k_target: k,
        mode: GraphMode::Constrained,
        params: Some(*params),
    })
}

/// Spherical dispersion of a vertex's out-edge directions:
/// 1 - |mean unit direction|. 0 when all neighbors share one direction,
/// approaching 1 for symmetric spread. Errors on isolated vertices.
pub fn angular_coverage(
    cloud: &PointCloud,
    graph: &NeighborGraph,
    vertex: usize,
) -> Result<f64, GeomError> {
    let neighbors = graph.out_neighbors(vertex);
    if neighbors.is_empty() {
        return Err(GeomError::IsolatedVertex(vertex));
    }
    let origin = cloud.point(vertex);
    let mut sum = Vec3::zeros();
    let mut count = 0usize;
    for &j in neighbors {
        let d = cloud.point(j) - origin;
        let n = d.norm();
        if n > 0.0 {
            sum += d / n;
            count += 1;
        }
    }
    if count == 0 {
        return Err(GeomError::IsolatedVertex(vertex));
    }
    Ok(1.0 - (sum / count as f64).norm())
}

/// Per-graph summary statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphStats {
    pub mean_out_degree: f64,
    pub min_out_degree: usize,
    pub max_out_degree: usize,
    pub mean_angular_coverage: f64,
    pub mean_edge_length: f64,
    /// 16 log-spaced bins over [min, max] positive edge length.
    pub edge_length_histogram: [usize; 16],
}

pub fn graph_stats(graph: &NeighborGraph, cloud: &PointCloud) -> GraphStats {
    let n = graph.num_vertices();
    let degrees: Vec<usize> = graph.out_edges().iter().map(Vec::len).collect();
    let total_edges: usize = degrees.iter().sum();
    let mut lengths = Vec::with_capacity(total_edges);
    for (i, nbrs) in graph.out_edges().iter().enumerate() {
        for &j in nbrs {
            lengths.push((cloud.point(j) - cloud.point(i)).norm());
        }
    }
    let mean_edge_length = if lengths.is_empty() {
        0.0
    } else {
        lengths.iter().sum::<f64>() / lengths.len() as f64
    };
    let coverages: Vec<f64> = (0..n)
        .filter_map(|v| angular_coverage(cloud, graph, v).ok())
        .collect();
    let mean_angular_coverage = if coverages.is_empty() {
        0.0
    } else {
        coverages.iter().sum::<f64>() / coverages.len() as f64
    };
    let mut edge_length_histogram = [0usize; 16];
    let positive: Vec<f64> = lengths.iter().copied().filter(|&l| l > 0.0).collect();
    if !positive.is_empty() {
        let lo = positive.iter().cloned().fold(f64::INFINITY, f64::min).ln();
        let hi = positive
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
            .ln();
        let span = (hi - lo).max(f64::MIN_POSITIVE);
        for l in &positive {
            let t = ((l.ln() - lo) / span * 16.0) as usize;
            edge_length_histogram[t.min(15)] += 1;
        }
    }
    GraphStats {
        mean_out_degree: total_edges as f64 / n as f64,
        min_out_degree: degrees.iter().copied().min().unwrap_or(0),
        max_out_degree: degrees.iter().copied().max().unwrap_or(0),
        mean_angular_coverage,
        mean_edge_length,
        edge_length_histogram,
    }
}
