//! Per-point local geometry: normals and tangent frames, spin-image
//! coordinates, shape index, and the assembled 9D descriptor.

use crate::cloud::PointCloud;
use crate::error::GeomError;
use crate::kdtree::SpatialIndex;
use crate::Vec3;
use nalgebra::Matrix3;

/// Orthonormal right-handed frame at a point: `tangent_u x tangent_v = normal`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalFrame {
    pub origin: Vec3,
    pub normal: Vec3,
    pub tangent_u: Vec3,
    pub tangent_v: Vec3,
    /// Set when the neighborhood covariance was rank <= 1; the frame then
    /// carries the fallback normal (0,0,1).
    pub degenerate: bool,
}

impl LocalFrame {
    /// Completes a frame from a unit normal, choosing a deterministic
    /// right-handed tangent basis.
    pub fn from_normal(origin: Vec3, normal: Vec3, degenerate: bool) -> Self {
        // seed axis: the coordinate axis least aligned with the normal
        let abs = normal.abs();
        let seed = if abs.x <= abs.y && abs.x <= abs.z {
            Vec3::x()
        } else if abs.y <= abs.z {
            Vec3::y()
        } else {
            Vec3::z()
        };
        let tangent_u = seed.cross(&normal).normalize();
        let tangent_v = normal.cross(&tangent_u);
        LocalFrame {
            origin,
            normal,
            tangent_u,
            tangent_v,
            degenerate,
        }
    }
}

/// Spin-image coordinates of a point relative to a reference frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinCoordinates {
    /// In-plane (radial) distance from the normal axis; nonnegative.
    pub alpha: f64,
    /// Out-of-plane signed distance from the tangent plane.
    pub beta: f64,
}

/// beta = eta . (other - origin); alpha = sqrt(|other - origin|^2 - beta^2).
pub fn spin_coordinates(reference: &LocalFrame, other: &Vec3) -> SpinCoordinates {
    let d = other - reference.origin;
    let beta = reference.normal.dot(&d);
    let alpha = (d.norm_squared() - beta * beta).max(0.0).sqrt();
    SpinCoordinates { alpha, beta }
}

/// The 9D per-point descriptor: position, unit normal, neighborhood-mean
/// spin coordinates, shape index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometricDescriptor {
    pub position: Vec3,
    pub normal: Vec3,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub degenerate: bool,
}

impl GeometricDescriptor {
    pub fn as_array(&self) -> [f64; 9] {
        [
            self.position.x,
            self.position.y,
            self.position.z,
            self.normal.x,
            self.normal.y,
            self.normal.z,
            self.alpha,
            self.beta,
            self.gamma,
        ]
    }
}

const RANK_EPS: f64 = 1e-12;

/// Estimates per-point frames by covariance PCA over the k_normal nearest
/// neighbors. Normals are oriented away from the cloud centroid. If the
/// cloud carries input normals, those are used directly instead of PCA.
pub fn estimate_normals(
    cloud: &PointCloud,
    index: &SpatialIndex,
    k_normal: usize,
) -> Result<Vec<LocalFrame>, GeomError> {
    if k_normal < 3 {
        return Err(GeomError::InvalidParam("k_normal must be >= 3".into()));
    }
    if let Some(normals) = cloud.normals() {
        return Ok(cloud
            .points()
            .iter()
            .zip(normals)
            .map(|(p, n)| LocalFrame::from_normal(*p, n.normalize(), false))
            .collect());
    }
    let n = cloud.len() as f64;
    let centroid: Vec3 = cloud.points().iter().sum::<Vec3>() / n;
    let mut frames = Vec::with_capacity(cloud.len());
    for p in cloud.points() {
        let neighbors = index.knn(p, k_normal, false);
        let m = neighbors.len() as f64;
        let mean: Vec3 = neighbors
            .iter()
            .map(|nb| cloud.point(nb.index))
            .sum::<Vec3>()
            / m;
        let mut cov = Matrix3::zeros();
        for nb in &neighbors {
            let d = cloud.point(nb.index) - mean;
            cov += d * d.transpose();
        }
        cov /= m;
        let eig = cov.symmetric_eigen();
        // sort eigenpairs ascending
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let lambda_mid = eig.eigenvalues[order[1]].max(0.0);
        let lambda_max = eig.eigenvalues[order[2]].max(0.0);
        if lambda_max <= 0.0 || lambda_mid <= RANK_EPS * lambda_max {
            frames.push(LocalFrame::from_normal(*p, Vec3::z(), true));
            continue;
        }
        let mut normal: Vec3 = eig.eigenvectors.column(order[0]).into_owned();
        normal.normalize_mut();
        let outward = p - centroid;
        let dot = normal.dot(&outward);
        if dot < 0.0 {
            normal = -normal;
        } else if dot == 0.0 {
            // deterministic sign for points at the centroid or with a
            // normal orthogonal to the outward direction
            let lead = normal
                .iter()
                .cloned()
                .max_by(|a, b| a.abs().total_cmp(&b.abs()))
                .unwrap();
            if lead < 0.0 {
                normal = -normal;
            }
        }
        frames.push(LocalFrame::from_normal(*p, normal, false));
    }
    Ok(frames)
}

/// Principal curvatures from a least-squares quadric fit
/// `w = a u^2 + b u v + c v^2` in the point's frame; `None` on a
/// rank-deficient fit.
fn principal_curvatures(
    cloud: &PointCloud,
    index: &SpatialIndex,
    frame: &LocalFrame,
    k_curv: usize,
) -> Option<(f64, f64)> {
    let neighbors = index.knn(&frame.origin, k_curv, true);
    if neighbors.len() < 5 {
        return None;
    }
    // normal equations for the 3-parameter quadric
    let mut ata = Matrix3::zeros();
    let mut atb = Vec3::zeros();
    for nb in &neighbors {
        let d = cloud.point(nb.index) - frame.origin;
        let u = frame.tangent_u.dot(&d);
        let v = frame.tangent_v.dot(&d);
        let w = frame.normal.dot(&d);
        let row = Vec3::new(u * u, u * v, v * v);
        ata += row * row.transpose();
        atb += row * w;
    }
    let coeffs = ata.lu().solve(&atb)?;
    let (a, b, c) = (coeffs.x, coeffs.y, coeffs.z);
    if !(a.is_finite() && b.is_finite() && c.is_finite()) {
        return None;
    }
    // curvature sign convention: a convex cap seen along its outward
    // normal has positive principal curvatures
    let mean = -(a + c);
    let spread = ((a - c) * (a - c) + b * b).sqrt();
    Some((mean + spread, mean - spread))
}

const CURV_EPS: f64 = 1e-9;

fn shape_index_from_curvatures(kappa1: f64, kappa2: f64) -> f64 {
    debug_assert!(kappa1 >= kappa2);
    if kappa1.abs() < CURV_EPS && kappa2.abs() < CURV_EPS {
        return 0.0;
    }
    let sum = kappa1 + kappa2;
    let diff = kappa1 - kappa2;
    if diff < CURV_EPS * sum.abs().max(1.0) {
        return sum.signum();
    }
    (2.0 / std::f64::consts::PI) * (sum / diff).atan()
}

/// Shape index of one point: +1 cap, 0 saddle/plane, -1 cup.
/// Degenerate frames and rank-deficient fits return 0.
pub fn shape_index(
    cloud: &PointCloud,
    index: &SpatialIndex,
    frames: &[LocalFrame],
    point: usize,
    k_curv: usize,
) -> Result<f64, GeomError> {
    if k_curv < 6 {
        return Err(GeomError::InvalidParam("k_curv must be >= 6".into()));
    }
    let frame = &frames[point];
    if frame.degenerate {
        return Ok(0.0);
    }
    match principal_curvatures(cloud, index, frame, k_curv) {
        Some((k1, k2)) => Ok(shape_index_from_curvatures(k1, k2)),
        None => Ok(0.0),
    }
}

/// Computes the full 9D descriptor for every point.
///
/// alpha/beta are arithmetic means of the spin coordinates over the point's
/// k_feat nearest neighbors; coincident duplicates contribute nothing.
pub fn compute_descriptors(
    cloud: &PointCloud,
    index: &SpatialIndex,
    k_feat: usize,
    k_normal: usize,
    k_curv: usize,
) -> Result<Vec<GeometricDescriptor>, GeomError> {
    if k_feat == 0 {
        return Err(GeomError::InvalidParam("k_feat must be >= 1".into()));
    }
    let frames = estimate_normals(cloud, index, k_normal)?;
    let mut out = Vec::with_capacity(cloud.len());
    for (i, frame) in frames.iter().enumerate() {
        let neighbors = index.knn(&frame.origin, k_feat, true);
        let (mut alpha, mut beta) = (0.0, 0.0);
        if !neighbors.is_empty() {
            for nb in &neighbors {
                let sc = spin_coordinates(frame, &cloud.point(nb.index));
                alpha += sc.alpha;
                beta += sc.beta;
            }
            let m = neighbors.len() as f64;
            alpha /= m;
            beta /= m;
        }
        let gamma = shape_index(cloud, index, &frames, i, k_curv)?;
        out.push(GeometricDescriptor {
            position: frame.origin,
            normal: frame.normal,
            alpha,
            beta,
            gamma,
            degenerate: frame.degenerate,
        });
    }
    Ok(out)
}
