//! Point-cloud geometry toolkit: local geometric descriptors and
//! neighborhood-graph construction for graph neural network pipelines.
//!
//! The crate provides:
//! - point cloud loading, generation and normalization ([`cloud`], [`io`]),
//! - an exact kd-tree for k-NN and radius queries ([`kdtree`]),
//! - per-point local frames, spin coordinates, shape index and the 9D
//!   geometric descriptor ([`local`]),
//! - k-NN and geometrically constrained neighborhood graphs with coverage
//!   metrics ([`graph`]),
//! - a small reference MLP and EdgeConv layer with exact gradients ([`nn`]).

pub mod cloud;
pub mod error;
pub mod graph;
pub mod io;
pub mod kdtree;
pub mod local;
pub mod nn;

pub use cloud::{PointCloud, SamplingSpec, Surface};
pub use error::GeomError;
pub use graph::{ConstraintParams, GraphMode, GraphStats, NeighborGraph};
pub use kdtree::SpatialIndex;
pub use local::{GeometricDescriptor, LocalFrame, SpinCoordinates};
pub use nn::{Activation, EdgeConvParams, MlpParams};

/// 3D point/vector type used throughout the crate.
pub type Vec3 = nalgebra::Vector3<f64>;
