//! Python bindings exposing the main cloud, descriptor, graph and
//! reference-network operations.

use geomgraph::cloud::{generate_cloud, SamplingSpec, Surface};
use geomgraph::graph::{
    angular_coverage, build_constrained_graph, build_knn_graph, graph_stats, ConstraintParams,
};
use geomgraph::io::{load_cloud, save_cloud, CloudFormat};
use geomgraph::local::compute_descriptors;
use geomgraph::nn::{
    edgeconv_forward, mlp_backward, mlp_forward, Activation, EdgeConvParams, MlpParams, Vec9,
};
use geomgraph::GeomError;
use nalgebra::DVector;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use std::path::PathBuf;

fn err(e: GeomError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(name = "PointCloud", from_py_object)]
#[derive(Clone)]
struct PyPointCloud {
    inner: geomgraph::PointCloud,
}

#[pymethods]
impl PyPointCloud {
    /// Build a cloud from a list of (x, y, z) tuples.
    #[new]
    fn new(points: Vec<(f64, f64, f64)>) -> PyResult<Self> {
        let pts = points
            .into_iter()
            .map(|(x, y, z)| geomgraph::Vec3::new(x, y, z))
            .collect();
        Ok(PyPointCloud {
            inner: geomgraph::PointCloud::new(pts, None).map_err(err)?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (path, format=None))]
    fn load(path: PathBuf, format: Option<&str>) -> PyResult<Self> {
        let fmt = match format {
            Some(f) => CloudFormat::parse(f).map_err(err)?,
            None => CloudFormat::from_path(&path),
        };
        Ok(PyPointCloud {
            inner: load_cloud(&path, fmt).map_err(err)?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (surface, count, density_exponent=0.0, noise_sigma=0.0, seed=0))]
    fn generate(
        surface: &str,
        count: usize,
        density_exponent: f64,
        noise_sigma: f64,
        seed: u64,
    ) -> PyResult<Self> {
        let spec = SamplingSpec {
            surface: Surface::parse(surface).map_err(err)?,
            count,
            density_exponent,
            noise_sigma,
            seed,
        };
        Ok(PyPointCloud {
            inner: generate_cloud(&spec).map_err(err)?,
        })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn points(&self) -> Vec<(f64, f64, f64)> {
        self.inner.points().iter().map(|p| (p.x, p.y, p.z)).collect()
    }

    fn normalize_unit_sphere(&self) -> PyResult<Self> {
        Ok(PyPointCloud {
            inner: self.inner.normalize_unit_sphere().map_err(err)?,
        })
    }

    #[pyo3(signature = (path, format=None))]
    fn save(&self, path: PathBuf, format: Option<&str>) -> PyResult<()> {
        let fmt = match format {
            Some(f) => CloudFormat::parse(f).map_err(err)?,
            None => CloudFormat::from_path(&path),
        };
        save_cloud(&self.inner, &path, fmt).map_err(err)
    }

    /// Per-point 9D descriptors as rows
    /// [x, y, z, nx, ny, nz, alpha, beta, gamma].
    #[pyo3(signature = (k_feat=20, k_normal=20, k_curv=30))]
    fn descriptors(&self, k_feat: usize, k_normal: usize, k_curv: usize) -> PyResult<Vec<[f64; 9]>> {
        let index = geomgraph::SpatialIndex::build(&self.inner).map_err(err)?;
        let descs =
            compute_descriptors(&self.inner, &index, k_feat, k_normal, k_curv).map_err(err)?;
        Ok(descs.iter().map(|d| d.as_array()).collect())
    }

    #[pyo3(signature = (k=20))]
    fn knn_graph(&self, k: usize) -> PyResult<PyNeighborGraph> {
        let index = geomgraph::SpatialIndex::build(&self.inner).map_err(err)?;
        Ok(PyNeighborGraph {
            inner: build_knn_graph(&self.inner, &index, k).map_err(err)?,
        })
    }

    #[pyo3(signature = (k=20, theta_deg=30.0, lam=1.25, pool_multiplier=4))]
    fn constrained_graph(
        &self,
        k: usize,
        theta_deg: f64,
        lam: f64,
        pool_multiplier: usize,
    ) -> PyResult<PyNeighborGraph> {
        let index = geomgraph::SpatialIndex::build(&self.inner).map_err(err)?;
        let params = ConstraintParams {
            theta: theta_deg.to_radians(),
            lambda: lam,
            candidate_multiplier: pool_multiplier,
        };
        Ok(PyNeighborGraph {
            inner: build_constrained_graph(&self.inner, &index, k, &params).map_err(err)?,
        })
    }
}

#[pyclass(name = "SpatialIndex")]
struct PySpatialIndex {
    cloud: geomgraph::PointCloud,
    inner: geomgraph::SpatialIndex,
}

#[pymethods]
impl PySpatialIndex {
    #[new]
    fn new(cloud: PyPointCloud) -> PyResult<Self> {
        let inner = geomgraph::SpatialIndex::build(&cloud.inner).map_err(err)?;
        Ok(PySpatialIndex {
            cloud: cloud.inner,
            inner,
        })
    }

    fn __len__(&self) -> usize {
        self.cloud.len()
    }

    /// k nearest neighbors of a query point: list of (index, distance).
    #[pyo3(signature = (query, k, exclude_self=false))]
    fn knn(&self, query: (f64, f64, f64), k: usize, exclude_self: bool) -> Vec<(usize, f64)> {
        self.inner
            .knn(
                &geomgraph::Vec3::new(query.0, query.1, query.2),
                k,
                exclude_self,
            )
            .into_iter()
            .map(|n| (n.index, n.distance))
            .collect()
    }

    fn radius_query(&self, query: (f64, f64, f64), radius: f64) -> Vec<(usize, f64)> {
        self.inner
            .radius_query(&geomgraph::Vec3::new(query.0, query.1, query.2), radius)
            .into_iter()
            .map(|n| (n.index, n.distance))
            .collect()
    }
}

#[pyclass(name = "NeighborGraph")]
struct PyNeighborGraph {
    inner: geomgraph::NeighborGraph,
}

#[pymethods]
impl PyNeighborGraph {
    #[getter]
    fn mode(&self) -> &'static str {
        self.inner.mode.name()
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.k_target
    }

    fn num_vertices(&self) -> usize {
        self.inner.num_vertices()
    }

    fn num_edges(&self) -> usize {
        self.inner.num_edges()
    }

    fn out_neighbors(&self, vertex: usize) -> PyResult<Vec<usize>> {
        if vertex >= self.inner.num_vertices() {
            return Err(PyValueError::new_err(format!("vertex {vertex} out of range")));
        }
        Ok(self.inner.out_neighbors(vertex).to_vec())
    }

    fn edges(&self) -> Vec<Vec<usize>> {
        self.inner.out_edges().to_vec()
    }

    fn angular_coverage(&self, cloud: PyPointCloud, vertex: usize) -> PyResult<f64> {
        angular_coverage(&cloud.inner, &self.inner, vertex).map_err(err)
    }

    /// Summary statistics as a dict.
    fn stats<'py>(&self, py: Python<'py>, cloud: PyPointCloud) -> PyResult<Bound<'py, PyAny>> {
        let s = graph_stats(&self.inner, &cloud.inner);
        let dict = pyo3::types::PyDict::new(py);
        dict.set_item("mean_out_degree", s.mean_out_degree)?;
        dict.set_item("min_out_degree", s.min_out_degree)?;
        dict.set_item("max_out_degree", s.max_out_degree)?;
        dict.set_item("mean_angular_coverage", s.mean_angular_coverage)?;
        dict.set_item("mean_edge_length", s.mean_edge_length)?;
        dict.set_item("edge_length_histogram", s.edge_length_histogram.to_vec())?;
        Ok(dict.into_any())
    }
}

#[pyclass(name = "Mlp")]
struct PyMlp {
    inner: MlpParams,
}

#[pymethods]
impl PyMlp {
    /// Seeded uniform parameters in [-0.5, 0.5].
    #[staticmethod]
    #[pyo3(signature = (seed, activation="relu"))]
    fn seeded(seed: u64, activation: &str) -> PyResult<Self> {
        Ok(PyMlp {
            inner: MlpParams::seeded(seed, Activation::parse(activation).map_err(err)?),
        })
    }

    fn forward(&self, input: [f64; 9]) -> PyResult<[f64; 9]> {
        let out = mlp_forward(&self.inner, &Vec9::from_column_slice(&input)).map_err(err)?;
        Ok(out.into())
    }

    /// Gradient of `upstream . forward(input)` w.r.t. the input.
    fn input_gradient(&self, input: [f64; 9], upstream: [f64; 9]) -> [f64; 9] {
        let g = mlp_backward(
            &self.inner,
            &Vec9::from_column_slice(&input),
            &Vec9::from_column_slice(&upstream),
        );
        g.input.into()
    }

    fn save(&self, path: PathBuf, seed: u64) -> PyResult<()> {
        geomgraph::nn::save_mlp_params(&self.inner, seed, &path).map_err(err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyMlp {
            inner: geomgraph::nn::load_mlp_params(&path).map_err(err)?,
        })
    }
}

#[pyclass(name = "EdgeConv")]
struct PyEdgeConv {
    inner: EdgeConvParams,
}

#[pymethods]
impl PyEdgeConv {
    #[staticmethod]
    fn seeded(seed: u64, in_dim: usize, out_dim: usize) -> Self {
        PyEdgeConv {
            inner: EdgeConvParams::seeded(seed, in_dim, out_dim),
        }
    }

    fn forward(
        &self,
        features: Vec<Vec<f64>>,
        graph: &PyNeighborGraph,
    ) -> PyResult<Vec<Vec<f64>>> {
        let feats: Vec<DVector<f64>> = features.into_iter().map(DVector::from_vec).collect();
        let out = edgeconv_forward(&self.inner, &feats, &graph.inner).map_err(err)?;
        Ok(out.into_iter().map(|v| v.iter().copied().collect()).collect())
    }
}

#[pymodule]
fn geomgraph_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPointCloud>()?;
    m.add_class::<PySpatialIndex>()?;
    m.add_class::<PyNeighborGraph>()?;
    m.add_class::<PyMlp>()?;
    m.add_class::<PyEdgeConv>()?;
    Ok(())
}
