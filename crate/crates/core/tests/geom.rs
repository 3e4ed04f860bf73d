mod oracles;

use oracles::random_pose;
use demotamp::geom::{box_box, pose_distance_sq, se3_log, se3_retract, signed_distance, Pose, Shape, Twist};
use nalgebra::Vector3;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pose_gap(a: &Pose, b: &Pose) -> f64 {
    (a.translation - b.translation).norm() + a.rotation.angle_to(&b.rotation)
}

#[test]
fn exp_log_round_trip_on_ten_thousand_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for i in 0..10_000 {
        // Every tenth pair exercises the small-angle branch.
        let max_angle = if i % 10 == 0 { 1e-3 } else { 3.1 };
        let a = random_pose(&mut rng, 3.1, 2.0);
        let b = a * random_pose(&mut rng, max_angle, 1.0);
        let back = se3_retract(&a, &se3_log(&a, &b));
        worst = worst.max(pose_gap(&back, &b));
        let t = Twist::log(&b);
        let again = Twist::log(&t.exp());
        worst = worst.max((t.to_vector() - again.to_vector()).norm());
    }
    assert!(worst < 1e-9, "worst round-trip error {worst:e}");
}

#[test]
fn distance_is_symmetric_and_zero_on_the_diagonal() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..1000 {
        let a = random_pose(&mut rng, 3.1, 2.0);
        let b = random_pose(&mut rng, 3.1, 2.0);
        let ab = pose_distance_sq(&a, &b);
        let ba = pose_distance_sq(&b, &a);
        assert!((ab - ba).abs() <= 1e-9 * (1.0 + ab), "{ab} vs {ba}");
        assert!(pose_distance_sq(&a, &a) < 1e-24);
    }
}

#[test]
fn log_matches_matrix_logarithm() {
    let worst = oracles::log_vs_matrix_log(200, 9);
    assert!(worst < 1e-8, "worst deviation from the matrix logarithm {worst:e}");
}

#[test]
fn sphere_box_matches_surface_sampling_on_100_pairs() {
    let worst = oracles::sphere_box_vs_sampling(100, 10);
    assert!(worst < 1e-3, "worst deviation from sampling {worst:e}");
}

fn box_corners(pose: &Pose, h: &Vector3<f64>) -> Vec<Vector3<f64>> {
    let mut out = Vec::new();
    for sx in [-1.0, 1.0] {
        for sy in [-1.0, 1.0] {
            for sz in [-1.0, 1.0] {
                out.push(pose.transform_point(&Vector3::new(sx * h.x, sy * h.y, sz * h.z)));
            }
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn distances_are_symmetric(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shapes = [
            Shape::sphere(rng.random_range(0.01..0.3)).unwrap(),
            Shape::box_from_size([rng.random_range(0.01..0.5), rng.random_range(0.01..0.5), rng.random_range(0.01..0.5)]).unwrap(),
        ];
        let p1 = random_pose(&mut rng, 3.1, 0.5);
        let p2 = random_pose(&mut rng, 3.1, 0.5);
        for s1 in &shapes {
            for s2 in &shapes {
                let d12 = signed_distance(s1, &p1, s2, &p2);
                let d21 = signed_distance(s2, &p2, s1, &p1);
                prop_assert!((d12 - d21).abs() < 1e-12, "{} vs {}", d12, d21);
            }
        }
    }

    #[test]
    fn box_box_gap_never_exceeds_corner_distance(seed in any::<u64>()) {
        // The separating-axis value is a lower bound of the true distance,
        // which itself is at most the distance between any two points of the
        // boxes; corners give such points.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h1 = Vector3::new(rng.random_range(0.01..0.3), rng.random_range(0.01..0.3), rng.random_range(0.01..0.3));
        let h2 = Vector3::new(rng.random_range(0.01..0.3), rng.random_range(0.01..0.3), rng.random_range(0.01..0.3));
        let p1 = random_pose(&mut rng, 3.1, 0.6);
        let p2 = random_pose(&mut rng, 3.1, 0.6);
        let d = box_box(&p1, &h1, &p2, &h2);
        let c1 = box_corners(&p1, &h1);
        let c2 = box_corners(&p2, &h2);
        let corner = c1.iter().flat_map(|a| c2.iter().map(move |b| (a - b).norm())).fold(f64::INFINITY, f64::min);
        prop_assert!(d <= corner + 1e-12);
        // Overlapping centres always report penetration.
        if (p1.translation - p2.translation).norm() < 1e-3 {
            prop_assert!(d < 0.0);
        }
    }

    #[test]
    fn axis_aligned_face_gaps_are_exact(dx in 0.01f64..1.0, w1 in 0.01f64..0.3, w2 in 0.01f64..0.3) {
        let h1 = Vector3::new(w1, 0.2, 0.2);
        let h2 = Vector3::new(w2, 0.1, 0.1);
        let p1 = Pose::identity();
        let p2 = Pose::from_translation(w1 + w2 + dx, 0.05, -0.03);
        prop_assert!((box_box(&p1, &h1, &p2, &h2) - dx).abs() < 1e-12);
    }
}
