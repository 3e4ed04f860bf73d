mod oracles;

use demotamp::robot::{parse_model, Frame, JointVector, RobotModel};
use nalgebra::{Matrix4, Rotation3, Unit, Vector3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_q(model: &RobotModel, rng: &mut ChaCha8Rng) -> JointVector {
    JointVector::from_iterator(model.dof(), model.limits().iter().map(|[lo, hi]| rng.random_range(*lo..=*hi)))
}

#[test]
fn jacobian_matches_central_differences_on_every_builtin() {
    for name in RobotModel::builtin_names() {
        let worst = oracles::jacobian_vs_fd(name, 50, 11);
        assert!(worst < 1e-5, "{name}: worst Jacobian deviation {worst:e}");
    }
}

fn hom(rot: Rotation3<f64>, t: Vector3<f64>) -> Matrix4<f64> {
    let mut m = Matrix4::identity();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(rot.matrix());
    m.fixed_view_mut::<3, 1>(0, 3).copy_from(&t);
    m
}

/// Homogeneous-matrix chain for the 7-DoF arm, written out from its
/// dimensions: shoulder 0.333, upper arm 0.316, forearm 0.384, tool 0.21.
fn panda7_oracle(q: &[f64]) -> Matrix4<f64> {
    let z = Vector3::z_axis();
    let y = Vector3::y_axis();
    let minus_y = Unit::new_normalize(-Vector3::y());
    let chain: [(f64, Unit<Vector3<f64>>); 7] =
        [(0.333, z), (0.0, y), (0.316, z), (0.0, minus_y), (0.384, z), (0.0, y), (0.0, z)];
    let mut m = Matrix4::<f64>::identity();
    for ((offset, axis), angle) in chain.iter().zip(q) {
        m = m * hom(Rotation3::identity(), Vector3::new(0.0, 0.0, *offset));
        m = m * hom(Rotation3::from_axis_angle(axis, *angle), Vector3::zeros());
    }
    m * hom(Rotation3::identity(), Vector3::new(0.0, 0.0, 0.21))
}

#[test]
fn panda7_forward_kinematics_matches_matrix_chain() {
    let model = RobotModel::builtin("panda7").unwrap();
    let zero = JointVector::zeros(7);
    let tcp = model.gripper_pose(&zero).unwrap();
    assert!((tcp.translation - Vector3::new(0.0, 0.0, 1.243)).norm() < 1e-12);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..500 {
        let q = random_q(&model, &mut rng);
        let got = model.gripper_pose(&q).unwrap().to_homogeneous();
        let want = panda7_oracle(q.as_slice());
        assert!((got - want).norm() < 1e-12, "{got} vs {want}");
    }
}

#[test]
fn mobile_base_moves_everything() {
    let model = RobotModel::builtin("kmr").unwrap();
    assert!(model.is_mobile());
    let mut q = model.mid_configuration();
    q[0] = 0.0;
    q[1] = 0.0;
    q[2] = 0.0;
    let a = model.forward_kinematics(&q).unwrap();
    q[0] = 1.0;
    q[2] = std::f64::consts::FRAC_PI_2;
    let b = model.forward_kinematics(&q).unwrap();
    let expected = Vector3::new(1.0 - a.gripper.translation.y, a.gripper.translation.x, a.gripper.translation.z);
    assert!((b.gripper.translation - expected).norm() < 1e-12);
}

#[test]
fn parse_errors_report_lines() {
    let text = "name x\nbase fixed\njoint j revolute\n  origin 0 0 0 0 0 0\n  axis 0 0 1\n  limits 1 oops\n";
    let e = parse_model(text).unwrap_err().to_string();
    assert!(e.contains('6'), "{e}");
    assert!(RobotModel::builtin("nope").is_err());
}

#[test]
fn dimension_mismatch_is_an_error() {
    let model = RobotModel::builtin("ur5ish").unwrap();
    assert!(model.forward_kinematics(&JointVector::zeros(model.dof() + 1)).is_err());
    assert!(model.jacobian(&JointVector::zeros(2), Frame::Gripper).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn clamped_configurations_are_within_limits(seed in any::<u64>(), spread in 1.0f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for name in RobotModel::builtin_names() {
            let model = RobotModel::builtin(name).unwrap();
            let mut q = JointVector::from_iterator(model.dof(), (0..model.dof()).map(|_| rng.random_range(-spread..spread)));
            model.clamp_to_limits(&mut q);
            prop_assert!(model.within_limits(&q));
        }
    }

    #[test]
    fn gripper_rotation_stays_unit(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for name in RobotModel::builtin_names() {
            let model = RobotModel::builtin(name).unwrap();
            let q = random_q(&model, &mut rng);
            let p = model.gripper_pose(&q).unwrap();
            prop_assert!((p.rotation.norm() - 1.0).abs() < 1e-12);
        }
    }
}
