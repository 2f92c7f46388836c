//! Property tests over randomized inputs.

use geomgraph::cloud::{generate_cloud, SamplingSpec, Surface};
use geomgraph::graph::{build_constrained_graph, excluded_by, ConstraintParams};
use geomgraph::kdtree::{Neighbor, SpatialIndex};
use geomgraph::local::{
    compute_descriptors, estimate_normals, shape_index, spin_coordinates, LocalFrame,
};
use geomgraph::{PointCloud, Vec3};
use proptest::prelude::*;

fn vec3_strategy(range: f64) -> impl Strategy<Value = Vec3> {
    (-range..range, -range..range, -range..range).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn unit_vec3_strategy() -> impl Strategy<Value = Vec3> {
    vec3_strategy(1.0).prop_filter_map("nonzero", |v| {
        let n = v.norm();
        (n > 1e-3).then(|| v / n)
    })
}

proptest! {
    /// alpha^2 + beta^2 equals the squared pair distance.
    #[test]
    fn spin_pythagorean_identity(
        origin in vec3_strategy(10.0),
        normal in unit_vec3_strategy(),
        other in vec3_strategy(10.0),
    ) {
        let frame = LocalFrame::from_normal(origin, normal, false);
        let sc = spin_coordinates(&frame, &other);
        let d2 = (other - origin).norm_squared();
        prop_assert!(sc.alpha >= 0.0);
        let lhs = sc.alpha * sc.alpha + sc.beta * sc.beta;
        prop_assert!((lhs - d2).abs() <= 1e-9 * d2.max(1e-300));
    }

    /// alpha is invariant to rotating the other point about the normal axis.
    #[test]
    fn spin_alpha_rotation_invariant(
        other in vec3_strategy(5.0),
        angle in 0.0..std::f64::consts::TAU,
    ) {
        let frame = LocalFrame::from_normal(Vec3::zeros(), Vec3::z(), false);
        let rotated = nalgebra::Rotation3::from_axis_angle(&Vec3::z_axis(), angle) * other;
        let a = spin_coordinates(&frame, &other);
        let b = spin_coordinates(&frame, &rotated);
        prop_assert!((a.alpha - b.alpha).abs() < 1e-6 * a.alpha.max(1.0));
        prop_assert!((a.beta - b.beta).abs() < 1e-6 * a.beta.abs().max(1.0));
    }

    /// Exclusion is monotone in theta: a candidate excluded at a smaller
    /// angle stays excluded at any larger angle.
    #[test]
    fn exclusion_monotone_in_theta(
        x in vec3_strategy(2.0),
        y in vec3_strategy(2.0),
        z in vec3_strategy(2.0),
        theta_small in 0.01..1.0_f64,
        theta_extra in 0.0..1.0_f64,
        lambda in 1.0..3.0_f64,
    ) {
        let small = excluded_by(&x, &y, &z, theta_small, lambda);
        let large = excluded_by(&x, &y, &z, theta_small + theta_extra, lambda);
        prop_assert!(!small || large);
    }
}

fn brute_knn(points: &[Vec3], query: &Vec3, k: usize) -> Vec<(usize, f64)> {
    let mut all: Vec<(usize, f64)> = points
        .iter()
        .enumerate()
        .map(|(i, p)| (i, (p - query).norm()))
        .collect();
    all.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    all.truncate(k);
    all
}

fn as_pairs(ns: &[Neighbor]) -> Vec<(usize, f64)> {
    ns.iter().map(|n| (n.index, n.distance)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn knn_matches_brute_force(seed in 0u64..1000, n in 2usize..300, k in 1usize..40) {
        let cloud = generate_cloud(&SamplingSpec {
            surface: Surface::TwoCluster,
            count: n,
            density_exponent: 0.0,
            noise_sigma: 0.4,
            seed,
        }).unwrap();
        let index = SpatialIndex::build(&cloud).unwrap();
        let query = cloud.point(seed as usize % n) + Vec3::new(0.013, -0.021, 0.007);
        prop_assert_eq!(
            as_pairs(&index.knn(&query, k, false)),
            brute_knn(cloud.points(), &query, k)
        );
    }

    #[test]
    fn knn_full_is_distance_sorted_permutation(seed in 0u64..200, n in 2usize..150) {
        let cloud = generate_cloud(&SamplingSpec {
            surface: Surface::Sphere,
            count: n,
            density_exponent: 0.0,
            noise_sigma: 0.2,
            seed,
        }).unwrap();
        let index = SpatialIndex::build(&cloud).unwrap();
        let res = index.knn(&Vec3::new(0.1, 0.2, 0.3), n, false);
        prop_assert_eq!(res.len(), n);
        let mut seen: Vec<usize> = res.iter().map(|r| r.index).collect();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..n).collect::<Vec<_>>());
        for w in res.windows(2) {
            prop_assert!(w[0].distance <= w[1].distance);
        }
    }

    /// gamma stays within [-1, 1] on noisy clouds.
    #[test]
    fn shape_index_in_range(seed in 0u64..50) {
        let cloud = generate_cloud(&SamplingSpec {
            surface: Surface::TwoCluster,
            count: 120,
            density_exponent: 0.0,
            noise_sigma: 0.3,
            seed,
        }).unwrap();
        let index = SpatialIndex::build(&cloud).unwrap();
        let frames = estimate_normals(&cloud, &index, 10).unwrap();
        for i in 0..cloud.len() {
            let gamma = shape_index(&cloud, &index, &frames, i, 12).unwrap();
            prop_assert!((-1.0..=1.0).contains(&gamma), "gamma {}", gamma);
        }
    }
}

#[test]
fn flipping_normal_negates_beta_and_gamma() {
    let cloud = generate_cloud(&SamplingSpec {
        surface: Surface::Sphere,
        count: 2000,
        density_exponent: 0.0,
        noise_sigma: 0.0,
        seed: 19,
    })
    .unwrap();
    let index = SpatialIndex::build(&cloud).unwrap();
    let frames = estimate_normals(&cloud, &index, 20).unwrap();
    for i in (0..cloud.len()).step_by(97) {
        let f = frames[i];
        let flipped = LocalFrame::from_normal(f.origin, -f.normal, false);
        let other = cloud.point((i + 1) % cloud.len());
        let a = spin_coordinates(&f, &other);
        let b = spin_coordinates(&flipped, &other);
        assert!((a.alpha - b.alpha).abs() < 1e-12);
        assert!((a.beta + b.beta).abs() < 1e-12);

        let mut flipped_frames = frames.clone();
        flipped_frames[i] = flipped;
        let g = shape_index(&cloud, &index, &frames, i, 30).unwrap();
        let g_flipped = shape_index(&cloud, &index, &flipped_frames, i, 30).unwrap();
        assert!(
            (g + g_flipped).abs() < 1e-9,
            "gamma {g} vs flipped {g_flipped}"
        );
    }
}

#[test]
fn sphere_gamma_invariant_under_uniform_scale() {
    let base = generate_cloud(&SamplingSpec {
        surface: Surface::Sphere,
        count: 3000,
        density_exponent: 0.0,
        noise_sigma: 0.0,
        seed: 23,
    })
    .unwrap();
    let scaled = PointCloud::new(base.points().iter().map(|p| p * 7.5).collect(), None)
        .unwrap()
        .normalize_unit_sphere()
        .unwrap();
    let mean_gamma = |cloud: &PointCloud| {
        let index = SpatialIndex::build(cloud).unwrap();
        let frames = estimate_normals(cloud, &index, 20).unwrap();
        (0..cloud.len())
            .map(|i| shape_index(cloud, &index, &frames, i, 30).unwrap())
            .sum::<f64>()
            / cloud.len() as f64
    };
    let a = mean_gamma(&base);
    let b = mean_gamma(&scaled);
    assert!((a - b).abs() < 0.02, "mean gamma {a} vs scaled {b}");
}

#[test]
fn constrained_graph_deterministic_across_runs() {
    let cloud = generate_cloud(&SamplingSpec {
        surface: Surface::RangeSkewedSphere,
        count: 800,
        density_exponent: 2.0,
        noise_sigma: 0.0,
        seed: 31,
    })
    .unwrap();
    let build = || {
        let index = SpatialIndex::build(&cloud).unwrap();
        build_constrained_graph(&cloud, &index, 20, &ConstraintParams::default()).unwrap()
    };
    assert_eq!(build().out_edges(), build().out_edges());
}

#[test]
fn descriptor_pipeline_deterministic() {
    let cloud = generate_cloud(&SamplingSpec {
        surface: Surface::Cylinder,
        count: 500,
        density_exponent: 0.0,
        noise_sigma: 0.01,
        seed: 47,
    })
    .unwrap();
    let run = || {
        let index = SpatialIndex::build(&cloud).unwrap();
        compute_descriptors(&cloud, &index, 20, 20, 30).unwrap()
    };
    assert_eq!(run(), run());
}
