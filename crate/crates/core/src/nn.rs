//! Desk-scale reference network pieces: the 9 -> 18 -> 9 projection MLP
//! with exact reverse-mode gradients, and a single EdgeConv layer with
//! max aggregation.

use crate::error::GeomError;
use crate::graph::NeighborGraph;
use nalgebra::{DMatrix, DVector, SMatrix, SVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

pub type Vec9 = SVector<f64, 9>;
type Vec18 = SVector<f64, 18>;
type Mat18x9 = SMatrix<f64, 18, 9>;
type Mat9x18 = SMatrix<f64, 9, 18>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    pub fn parse(s: &str) -> Result<Self, GeomError> {
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            other => Err(GeomError::InvalidParam(format!(
                "unknown activation {other:?}"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
        }
    }

    fn apply(&self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
        }
    }

    fn derivative(&self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - x.tanh() * x.tanh(),
        }
    }
}

/// Parameters of the two-layer projection network: 9 -> 18 -> 9.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub weight1: Mat18x9,
    pub bias1: Vec18,
    pub weight2: Mat9x18,
    pub bias2: Vec9,
    pub activation: Activation,
}

impl MlpParams {
    pub fn zeros(activation: Activation) -> Self {
        MlpParams {
            weight1: Mat18x9::zeros(),
            bias1: Vec18::zeros(),
            weight2: Mat9x18::zeros(),
            bias2: Vec9::zeros(),
            activation,
        }
    }

    /// Seeded uniform init in [-0.5, 0.5] for deterministic fixtures.
    pub fn seeded(seed: u64, activation: Activation) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut next = || rng.random::<f64>() - 0.5;
        MlpParams {
            weight1: Mat18x9::from_fn(|_, _| next()),
            bias1: Vec18::from_fn(|_, _| next()),
            weight2: Mat9x18::from_fn(|_, _| next()),
            bias2: Vec9::from_fn(|_, _| next()),
            activation,
        }
    }
}

/// layer2(act(layer1(p))); rejects non-finite input.
pub fn mlp_forward(params: &MlpParams, input: &Vec9) -> Result<Vec9, GeomError> {
    if !input.iter().all(|v| v.is_finite()) {
        return Err(GeomError::InvalidParam("non-finite MLP input".into()));
    }
    let pre1 = params.weight1 * input + params.bias1;
    let hidden = pre1.map(|x| params.activation.apply(x));
    Ok(params.weight2 * hidden + params.bias2)
}

/// Gradients of `upstream . mlp_forward(params, input)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGradients {
    pub weight1: Mat18x9,
    pub bias1: Vec18,
    pub weight2: Mat9x18,
    pub bias2: Vec9,
    pub input: Vec9,
}

/// Exact reverse-mode gradients through the two layers.
pub fn mlp_backward(params: &MlpParams, input: &Vec9, upstream: &Vec9) -> MlpGradients {
    let pre1 = params.weight1 * input + params.bias1;
    let hidden = pre1.map(|x| params.activation.apply(x));

    let bias2 = *upstream;
    let weight2 = upstream * hidden.transpose();
    let d_hidden = params.weight2.transpose() * upstream;
    let d_pre1 = d_hidden.component_mul(&pre1.map(|x| params.activation.derivative(x)));
    let bias1 = d_pre1;
    let weight1 = d_pre1 * input.transpose();
    let input_grad = params.weight1.transpose() * d_pre1;
    MlpGradients {
        weight1,
        bias1,
        weight2,
        bias2,
        input: input_grad,
    }
}

/// One EdgeConv layer: per out-edge (i, j) the edge response is
/// `relu(W . [x_i ; x_j - x_i] + b)`, aggregated per vertex by a
/// component-wise maximum.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeConvParams {
    pub in_dim: usize,
    pub out_dim: usize,
    /// out_dim x (2 * in_dim)
    pub weight: DMatrix<f64>,
    pub bias: DVector<f64>,
}

impl EdgeConvParams {
    pub fn new(weight: DMatrix<f64>, bias: DVector<f64>) -> Result<Self, GeomError> {
        if weight.ncols() % 2 != 0 || weight.nrows() != bias.len() {
            return Err(GeomError::InvalidParam(format!(
                "EdgeConv weight {}x{} inconsistent with bias length {}",
                weight.nrows(),
                weight.ncols(),
                bias.len()
            )));
        }
        Ok(EdgeConvParams {
            in_dim: weight.ncols() / 2,
            out_dim: weight.nrows(),
            weight,
            bias,
        })
    }

    pub fn seeded(seed: u64, in_dim: usize, out_dim: usize) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut next = || rng.random::<f64>() - 0.5;
        let weight = DMatrix::from_fn(out_dim, 2 * in_dim, |_, _| next());
        let bias = DVector::from_fn(out_dim, |_, _| next());
        EdgeConvParams {
            in_dim,
            out_dim,
            weight,
            bias,
        }
    }
}

pub fn edgeconv_forward(
    params: &EdgeConvParams,
    features: &[DVector<f64>],
    graph: &NeighborGraph,
) -> Result<Vec<DVector<f64>>, GeomError> {
    if features.len() != graph.num_vertices() {
        return Err(GeomError::InvalidParam(format!(
            "feature count {} does not match vertex count {}",
            features.len(),
            graph.num_vertices()
        )));
    }
    for (i, f) in features.iter().enumerate() {
        if f.len() != params.in_dim {
            return Err(GeomError::InvalidParam(format!(
                "feature {} has dim {}, expected {}",
                i,
                f.len(),
                params.in_dim
            )));
        }
    }
    let mut out = Vec::with_capacity(features.len());
    let mut edge_input = DVector::zeros(2 * params.in_dim);
    for (i, xi) in features.iter().enumerate() {
        let neighbors = graph.out_neighbors(i);
        if neighbors.is_empty() {
            return Err(GeomError::IsolatedVertex(i));
        }
        let mut acc = DVector::from_element(params.out_dim, f64::NEG_INFINITY);
        for &j in neighbors {
            for d in 0..params.in_dim {
                edge_input[d] = xi[d];
                edge_input[params.in_dim + d] = features[j][d] - xi[d];
            }
            let response = (&params.weight * &edge_input + &params.bias).map(|x| x.max(0.0));
            acc.zip_apply(&response, |a, r| *a = a.max(r));
        }
        out.push(acc);
    }
    Ok(out)
}

/// Parameter file: a 3-line header (shapes, activation, seed) followed by
/// one CSV row per matrix row, in declaration order.
pub fn format_mlp_params(params: &MlpParams, seed: u64) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# shape 18 9 9 18");
    let _ = writeln!(out, "# activation {}", params.activation.name());
    let _ = writeln!(out, "# seed {seed}");
    let row_csv = |vals: &mut dyn Iterator<Item = f64>| {
        vals.map(|v| format!("{v:.17e}"))
            .collect::<Vec<_>>()
            .join(",")
    };
    for r in 0..18 {
        let _ = writeln!(out, "{}", row_csv(&mut params.weight1.row(r).iter().copied()));
    }
    let _ = writeln!(out, "{}", row_csv(&mut params.bias1.iter().copied()));
    for r in 0..9 {
        let _ = writeln!(out, "{}", row_csv(&mut params.weight2.row(r).iter().copied()));
    }
    let _ = writeln!(out, "{}", row_csv(&mut params.bias2.iter().copied()));
    out
}

pub fn parse_mlp_params(text: &str) -> Result<MlpParams, GeomError> {
    let mut lines = text.lines().enumerate();
    let (_, shape_line) = lines.next().ok_or(GeomError::Parse {
        line: 1,
        message: "missing shape header".into(),
    })?;
    if shape_line.trim() != "# shape 18 9 9 18" {
        return Err(GeomError::Parse {
            line: 1,
            message: format!("unsupported shape header {:?}", shape_line.trim()),
        });
    }
    let (_, act_line) = lines.next().ok_or(GeomError::Parse {
        line: 2,
        message: "missing activation header".into(),
    })?;
    let activation = Activation::parse(
        act_line
            .trim()
            .strip_prefix("# activation ")
            .ok_or(GeomError::Parse {
                line: 2,
                message: "malformed activation header".into(),
            })?,
    )?;
    let (_, seed_line) = lines.next().ok_or(GeomError::Parse {
        line: 3,
        message: "missing seed header".into(),
    })?;
    if !seed_line.trim().starts_with("# seed ") {
        return Err(GeomError::Parse {
            line: 3,
            message: "malformed seed header".into(),
        });
    }
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (n, l) in lines {
        let l = l.trim();
        if l.is_empty() {
            continue;
        }
        let vals: Vec<f64> = l
            .split(',')
            .map(|t| {
                t.trim().parse::<f64>().map_err(|_| GeomError::Parse {
                    line: n + 1,
                    message: format!("invalid number {t:?}"),
                })
            })
            .collect::<Result<_, _>>()?;
        rows.push(vals);
    }
    if rows.len() != 18 + 1 + 9 + 1 {
        return Err(GeomError::Parse {
            line: 0,
            message: format!("expected 29 data rows, found {}", rows.len()),
        });
    }
    let check = |row: &[f64], want: usize, which: &str| -> Result<(), GeomError> {
        if row.len() != want {
            return Err(GeomError::Parse {
                line: 0,
                message: format!("{which} row has {} values, expected {want}", row.len()),
            });
        }
        Ok(())
    };
    for r in rows[..18].iter() {
        check(r, 9, "weight1")?;
    }
    check(&rows[18], 18, "bias1")?;
    for r in rows[19..28].iter() {
        check(r, 18, "weight2")?;
    }
    check(&rows[28], 9, "bias2")?;
    Ok(MlpParams {
        weight1: Mat18x9::from_fn(|r, c| rows[r][c]),
        bias1: Vec18::from_fn(|r, _| rows[18][r]),
        weight2: Mat9x18::from_fn(|r, c| rows[19 + r][c]),
        bias2: Vec9::from_fn(|r, _| rows[28][r]),
        activation,
    })
}

pub fn save_mlp_params(params: &MlpParams, seed: u64, path: &Path) -> Result<(), GeomError> {
    fs::write(path, format_mlp_params(params, seed))
        .map_err(|e| GeomError::io(path.display().to_string(), e))
}

pub fn load_mlp_params(path: &Path) -> Result<MlpParams, GeomError> {
    let text = fs::read_to_string(path).map_err(|e| GeomError::io(path.display().to_string(), e))?;
    parse_mlp_params(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::PointCloud;
    use crate::graph::build_knn_graph;
    use crate::kdtree::SpatialIndex;
    use crate::Vec3;

    #[test]
    fn zero_params_give_zero_output() {
        let params = MlpParams::zeros(Activation::Relu);
        let p = Vec9::from_fn(|i, _| i as f64);
        assert_eq!(mlp_forward(&params, &p).unwrap(), Vec9::zeros());
    }

    #[test]
    fn identity_composition_is_relu() {
        // layer1 = [I; I] stacked, layer2 = [I, 0]: output = relu(p)
        let mut params = MlpParams::zeros(Activation::Relu);
        for i in 0..9 {
            params.weight1[(i, i)] = 1.0;
            params.weight1[(9 + i, i)] = 1.0;
            params.weight2[(i, i)] = 1.0;
        }
        let p = Vec9::from_fn(|i, _| i as f64 - 4.0);
        let out = mlp_forward(&params, &p).unwrap();
        assert_eq!(out, p.map(|x| x.max(0.0)));
    }

    #[test]
    fn forward_matches_straight_line_oracle() {
        let params = MlpParams::seeded(11, Activation::Relu);
        let p = Vec9::from_fn(|i, _| (i as f64 * 0.37).sin());
        let out = mlp_forward(&params, &p).unwrap();
        // independent recomputation, scalar loops only
        for r in 0..9 {
            let mut acc = params.bias2[r];
            for h in 0..18 {
                let mut pre = params.bias1[h];
                for c in 0..9 {
                    pre += params.weight1[(h, c)] * p[c];
                }
                acc += params.weight2[(r, h)] * pre.max(0.0);
            }
            assert!((out[r] - acc).abs() < 1e-12);
        }
    }

    #[test]
    fn non_finite_input_rejected() {
        let params = MlpParams::seeded(1, Activation::Relu);
        let mut p = Vec9::zeros();
        p[3] = f64::NAN;
        assert!(mlp_forward(&params, &p).is_err());
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let params = MlpParams::seeded(5, Activation::Tanh);
        let p = Vec9::from_fn(|i, _| i as f64 * 0.1);
        let g = mlp_backward(&params, &p, &Vec9::zeros());
        assert_eq!(g.weight1, Mat18x9::zeros());
        assert_eq!(g.weight2, Mat9x18::zeros());
        assert_eq!(g.input, Vec9::zeros());
    }

    /// Central finite differences of `upstream . forward` w.r.t. one
    /// scalar parameter reached through `access`.
    fn fd_grad(
        params: &MlpParams,
        input: &Vec9,
        upstream: &Vec9,
        access: impl Fn(&mut MlpParams) -> &mut f64,
    ) -> f64 {
        let h = 1e-6;
        let mut plus = params.clone();
        *access(&mut plus) += h;
        let mut minus = params.clone();
        *access(&mut minus) -= h;
        let f = |p: &MlpParams| upstream.dot(&mlp_forward(p, input).unwrap());
        (f(&plus) - f(&minus)) / (2.0 * h)
    }

    #[test]
    fn gradients_match_finite_differences() {
        for seed in 0..10 {
            let params = MlpParams::seeded(seed, Activation::Relu);
            let mut rng_in = Vec9::from_fn(|i, _| ((seed as f64 + 1.0) * (i as f64 + 1.3)).sin());
            rng_in *= 0.8;
            let upstream = Vec9::from_fn(|i, _| ((i as f64 - 4.0) * 0.21).cos());
            let analytic = mlp_backward(&params, &rng_in, &upstream);
            let mut max_rel: f64 = 0.0;
            let mut check = |a: f64, fd: f64| {
                let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-4);
                max_rel = max_rel.max(rel);
            };
            for r in 0..18 {
                for c in 0..9 {
                    let fd = fd_grad(&params, &rng_in, &upstream, |p| &mut p.weight1[(r, c)]);
                    check(analytic.weight1[(r, c)], fd);
                }
                let fd = fd_grad(&params, &rng_in, &upstream, |p| &mut p.bias1[r]);
                check(analytic.bias1[r], fd);
            }
            for r in 0..9 {
                for c in 0..18 {
                    let fd = fd_grad(&params, &rng_in, &upstream, |p| &mut p.weight2[(r, c)]);
                    check(analytic.weight2[(r, c)], fd);
                }
                let fd = fd_grad(&params, &rng_in, &upstream, |p| &mut p.bias2[r]);
                check(analytic.bias2[r], fd);
            }
            assert!(max_rel < 1e-5, "seed {seed}: max relative error {max_rel}");
        }
    }

    #[test]
    fn inactive_relu_unit_has_zero_gradient() {
        let mut params = MlpParams::zeros(Activation::Relu);
        params.weight1[(0, 0)] = 1.0;
        params.bias1[0] = -10.0; // unit 0 always inactive for small inputs
        params.weight2[(0, 0)] = 1.0;
        let p = Vec9::from_fn(|_, _| 0.5);
        let upstream = Vec9::from_fn(|_, _| 1.0);
        let g = mlp_backward(&params, &p, &upstream);
        assert_eq!(g.weight1[(0, 0)], 0.0);
        assert_eq!(g.bias1[0], 0.0);
    }

    fn tiny_graph_fixture(n: usize, k: usize, seed: u64) -> (PointCloud, NeighborGraph) {
        let cloud = crate::cloud::generate_cloud(&crate::cloud::SamplingSpec {
            surface: crate::cloud::Surface::Sphere,
            count: n,
            density_exponent: 0.0,
            noise_sigma: 0.1,
            seed,
        })
        .unwrap();
        let index = SpatialIndex::build(&cloud).unwrap();
        let graph = build_knn_graph(&cloud, &index, k).unwrap();
        (cloud, graph)
    }

    #[test]
    fn edgeconv_matches_per_edge_oracle() {
        let (cloud, graph) = tiny_graph_fixture(10, 3, 2);
        let params = EdgeConvParams::seeded(7, 3, 5);
        let features: Vec<DVector<f64>> = cloud
            .points()
            .iter()
            .map(|p| DVector::from_vec(vec![p.x, p.y, p.z]))
            .collect();
        let out = edgeconv_forward(&params, &features, &graph).unwrap();
        for (i, oi) in out.iter().enumerate() {
            for r in 0..5 {
                // brute-force per-edge recomputation
                let mut best = f64::NEG_INFINITY;
                for &j in graph.out_neighbors(i) {
                    let mut acc = params.bias[r];
                    for d in 0..3 {
                        acc += params.weight[(r, d)] * features[i][d];
                        acc += params.weight[(r, 3 + d)] * (features[j][d] - features[i][d]);
                    }
                    best = best.max(acc.max(0.0));
                }
                assert!((oi[r] - best).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn edgeconv_neighbor_permutation_invariant() {
        let (cloud, graph) = tiny_graph_fixture(12, 4, 3);
        let params = EdgeConvParams::seeded(9, 3, 6);
        let features: Vec<DVector<f64>> = cloud
            .points()
            .iter()
            .map(|p| DVector::from_vec(vec![p.x, p.y, p.z]))
            .collect();
        let base = edgeconv_forward(&params, &features, &graph).unwrap();
        let mut reversed_edges: Vec<Vec<usize>> = graph.out_edges().to_vec();
        for e in reversed_edges.iter_mut() {
            e.reverse();
        }
        let permuted =
            NeighborGraph::from_edges(reversed_edges, graph.k_target, graph.mode, graph.params);
        let out = edgeconv_forward(&params, &features, &permuted).unwrap();
        assert_eq!(base, out);
    }

    #[test]
    fn edgeconv_isolated_vertex_errors() {
        let cloud =
            PointCloud::new(vec![Vec3::zeros(), Vec3::x()], None).unwrap();
        let graph = NeighborGraph::from_edges(
            vec![vec![1], vec![]],
            1,
            crate::graph::GraphMode::Knn,
            None,
        );
        let params = EdgeConvParams::seeded(1, 3, 2);
        let features: Vec<DVector<f64>> = cloud
            .points()
            .iter()
            .map(|p| DVector::from_vec(vec![p.x, p.y, p.z]))
            .collect();
        assert!(matches!(
            edgeconv_forward(&params, &features, &graph),
            Err(GeomError::IsolatedVertex(1))
        ));
    }

    #[test]
    fn translation_only_reaches_center_pathway() {
        // zero the columns acting on x_i: output must be invariant to a
        // constant shift of all features
        let mut params = EdgeConvParams::seeded(4, 3, 4);
        for r in 0..4 {
            for c in 0..3 {
                params.weight[(r, c)] = 0.0;
            }
        }
        let (cloud, graph) = tiny_graph_fixture(8, 3, 6);
        let features: Vec<DVector<f64>> = cloud
            .points()
            .iter()
            .map(|p| DVector::from_vec(vec![p.x, p.y, p.z]))
            .collect();
        let shifted: Vec<DVector<f64>> = features
            .iter()
            .map(|f| f + DVector::from_vec(vec![10.0, -3.0, 0.5]))
            .collect();
        let a = edgeconv_forward(&params, &features, &graph).unwrap();
        let b = edgeconv_forward(&params, &shifted, &graph).unwrap();
        for (x, y) in a.iter().zip(&b) {
            // (x_j + t) - (x_i + t) reassociates the subtraction, so only
            // near-ulp agreement is possible
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn mlp_params_roundtrip() {
        let params = MlpParams::seeded(123, Activation::Tanh);
        let text = format_mlp_params(&params, 123);
        let back = parse_mlp_params(&text).unwrap();
        assert_eq!(params, back);
    }
}
