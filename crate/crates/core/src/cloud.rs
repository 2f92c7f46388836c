//! Point-cloud data model, normalization and synthetic cloud generation.

use crate::error::GeomError;
use crate::Vec3;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

/// An ordered set of 3D points with optional per-point unit normals.
///
/// Immutable after construction; cheap to share across workers.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Vec3>,
    normals: Option<Vec<Vec3>>,
}

impl PointCloud {
    /// Builds a cloud from raw points, validating the type invariants.
    pub fn new(points: Vec<Vec3>, normals: Option<Vec<Vec3>>) -> Result<Self, GeomError> {
        if points.is_empty() {
            return Err(GeomError::EmptyCloud);
        }
        for (i, p) in points.iter().enumerate() {
            if !p.iter().all(|c| c.is_finite()) {
                return Err(GeomError::NonFinite { line: i + 1 });
            }
        }
        if let Some(ns) = &normals {
            if ns.len() != points.len() {
                return Err(GeomError::InvalidParam(format!(
                    "normals length {} does not match point count {}",
                    ns.len(),
                    points.len()
                )));
            }
            for (i, n) in ns.iter().enumerate() {
                if (n.norm() - 1.0).abs() > 1e-6 {
                    return Err(GeomError::InvalidParam(format!(
                        "normal {} is not unit length (norm {})",
                        i,
                        n.norm()
                    )));
                }
            }
        }
        Ok(PointCloud { points, normals })
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

    pub fn point(&self, i: usize) -> Vec3 {
        self.points[i]
    }

    pub fn normals(&self) -> Option<&[Vec3]> {
        self.normals.as_deref()
    }

    /// Centers the cloud on its centroid and scales the farthest point to
    /// unit norm. Errors if all points coincide.
    pub fn normalize_unit_sphere(&self) -> Result<PointCloud, GeomError> {
        let n = self.points.len() as f64;
        let centroid: Vec3 = self.points.iter().sum::<Vec3>() / n;
        let max_norm = self
            .points
            .iter()
            .map(|p| (p - centroid).norm())
            .fold(0.0_f64, f64::max);
        if max_norm == 0.0 {
            return Err(GeomError::Degenerate(
                "all points coincide; cannot scale to unit sphere".into(),
            ));
        }
        let scale = 1.0 / max_norm;
        let points = self
            .points
            .iter()
            .map(|p| (p - centroid) * scale)
            .collect();
        // normals are direction-only, unaffected by uniform scale + translation
        Ok(PointCloud {
            points,
            normals: self.normals.clone(),
        })
    }
}

/// Surfaces available to the synthetic generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Surface {
    /// Unit square in the z = 0 plane, uniform.
    Plane,
    /// Unit sphere, uniform by area.
    Sphere,
    /// Cylinder of radius 1, axis z, height 2, lateral surface only.
    Cylinder,
    /// Two Gaussian clusters at (±1, 0, 0), sigma 0.1.
    TwoCluster,
    /// Unit sphere with local density proportional to
    /// 1/dist(point, sensor)^exponent, sensor fixed at (0,0,3).
    RangeSkewedSphere,
}

impl Surface {
    pub fn parse(s: &str) -> Result<Self, GeomError> {
        match s {
            "plane" => Ok(Surface::Plane),
            "sphere" => Ok(Surface::Sphere),
            "cylinder" => Ok(Surface::Cylinder),
            "two-cluster" => Ok(Surface::TwoCluster),
            "range-skewed-sphere" => Ok(Surface::RangeSkewedSphere),
            other => Err(GeomError::InvalidParam(format!("unknown surface {other:?}"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Surface::Plane => "plane",
            Surface::Sphere => "sphere",
            Surface::Cylinder => "cylinder",
            Surface::TwoCluster => "two-cluster",
            Surface::RangeSkewedSphere => "range-skewed-sphere",
        }
    }
}

/// Deterministic recipe for a synthetic cloud. Identical specs produce
/// bit-identical clouds.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingSpec {
    pub surface: Surface,
    pub count: usize,
    pub density_exponent: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

/// Virtual sensor position for the range-skewed sphere fixture.
pub const SENSOR_POSITION: Vec3 = Vec3::new(0.0, 0.0, 3.0);

impl SamplingSpec {
    pub fn validate(&self) -> Result<(), GeomError> {
        if self.count == 0 {
            return Err(GeomError::InvalidParam("count must be positive".into()));
        }
        if self.density_exponent < 0.0 {
            return Err(GeomError::InvalidParam(
                "density_exponent must be >= 0".into(),
            ));
        }
        if self.noise_sigma < 0.0 {
            return Err(GeomError::InvalidParam("noise_sigma must be >= 0".into()));
        }
        Ok(())
    }
}

fn unit_sphere_sample(rng: &mut ChaCha20Rng) -> Vec3 {
    loop {
        let v = Vec3::new(
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        );
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

/// Samples a cloud per the spec. Pure function of the spec: the PRNG is
/// seeded from `spec.seed` and nothing else.
pub fn generate_cloud(spec: &SamplingSpec) -> Result<PointCloud, GeomError> {
    spec.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let mut points = Vec::with_capacity(spec.count);
    match spec.surface {
        Surface::Plane => {
            for _ in 0..spec.count {
                let x: f64 = rng.random::<f64>() - 0.5;
                let y: f64 = rng.random::<f64>() - 0.5;
                points.push(Vec3::new(x, y, 0.0));
            }
        }
        Surface::Sphere => {
            for _ in 0..spec.count {
                points.push(unit_sphere_sample(&mut rng));
            }
        }
        Surface::Cylinder => {
            for _ in 0..spec.count {
                let phi = rng.random::<f64>() * std::f64::consts::TAU;
                let z = rng.random::<f64>() * 2.0 - 1.0;
                points.push(Vec3::new(phi.cos(), phi.sin(), z));
            }
        }
        Surface::TwoCluster => {
            for i in 0..spec.count {
                let center = if i % 2 == 0 {
                    Vec3::new(1.0, 0.0, 0.0)
                } else {
                    Vec3::new(-1.0, 0.0, 0.0)
                };
                let jitter = Vec3::new(
                    StandardNormal.sample(&mut rng),
                    StandardNormal.sample(&mut rng),
                    StandardNormal.sample(&mut rng),
                ) * 0.1;
                points.push(center + jitter);
            }
        }
        Surface::RangeSkewedSphere => {
            // Rejection sampling against the uniform sphere: accept with
            // probability (d_min / d)^e where d is distance to the sensor.
            // d_min = 2 for the unit sphere with the sensor at (0,0,3).
            let d_min = SENSOR_POSITION.norm() - 1.0;
            while points.len() < spec.count {
                let p = unit_sphere_sample(&mut rng);
                let d = (p - SENSOR_POSITION).norm();
                let accept = (d_min / d).powf(spec.density_exponent);
                if rng.random::<f64>() < accept {
                    points.push(p);
                }
            }
        }
    }
    if spec.noise_sigma > 0.0 {
        for p in points.iter_mut() {
            let jitter = Vec3::new(
                StandardNormal.sample(&mut rng),
                StandardNormal.sample(&mut rng),
                StandardNormal.sample(&mut rng),
            );
            *p += jitter * spec.noise_sigma;
        }
    }
    PointCloud::new(points, None)
}
