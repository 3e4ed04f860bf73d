//! Independent reference computations shared by the unit-level tests and
//! the acceptance suite. Each `*_vs_*` function returns the worst deviation
//! between the library and its oracle.
#![allow(dead_code)]

use demotamp::geom::{signed_distance, sphere_box, Pose, Shape, Twist};
use demotamp::ocp::{solve, Keyframe, OcpProblem, OcpState, OcpWeights, SolverSettings};
use demotamp::robot::{parse_model, Frame, JointVector, RobotModel};
use nalgebra::{Matrix2, Matrix3, Matrix4, UnitQuaternion, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_pose(rng: &mut ChaCha8Rng, max_angle: f64, max_t: f64) -> Pose {
    let axis = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let angle = rng.random_range(0.0..max_angle);
    let rot = UnitQuaternion::from_scaled_axis(axis.normalize() * angle);
    let t = Vector3::new(
        rng.random_range(-max_t..max_t),
        rng.random_range(-max_t..max_t),
        rng.random_range(-max_t..max_t),
    );
    Pose::new(t, rot)
}

/// Principal matrix logarithm by inverse scaling and squaring: repeated
/// Denman-Beavers square roots bring the matrix near identity, where the
/// Mercator series converges fast.
pub fn matrix_log(m: &Matrix4<f64>) -> Matrix4<f64> {
    let id = Matrix4::identity();
    let mut a = *m;
    let mut doublings = 0;
    while (a - id).norm() > 1e-3 {
        let mut y = a;
        let mut z = id;
        for _ in 0..60 {
            let yi = y.try_inverse().unwrap();
            let zi = z.try_inverse().unwrap();
            let ny = (y + zi) * 0.5;
            let nz = (z + yi) * 0.5;
            let done = (ny - y).norm() < 1e-15;
            y = ny;
            z = nz;
            if done {
                break;
            }
        }
        a = y;
        doublings += 1;
    }
    let x = a - id;
    let mut term = x;
    let mut sum = Matrix4::zeros();
    for k in 1..30 {
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        sum += term * (sign / k as f64);
        term *= x;
    }
    sum * 2f64.powi(doublings)
}

/// Deviation of `Twist::log` from the matrix logarithm of the homogeneous
/// transform on `n` random poses.
pub fn log_vs_matrix_log(n: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let p = random_pose(&mut rng, 3.0, 1.5);
        let l = matrix_log(&p.to_homogeneous());
        let omega = Vector3::new(l[(2, 1)], l[(0, 2)], l[(1, 0)]);
        let v = Vector3::new(l[(0, 3)], l[(1, 3)], l[(2, 3)]);
        let t = Twist::log(&p);
        worst = worst.max((t.angular - omega).norm()).max((t.linear - v).norm());
        // The rotation block of the oracle must be skew-symmetric.
        let r: Matrix3<f64> = l.fixed_view::<3, 3>(0, 0).into_owned();
        worst = worst.max((r + r.transpose()).norm());
    }
    worst
}

/// Distance from `c` to the surface of a box, by dense sampling of each face
/// followed by a local refinement around the best sample; negative inside.
pub fn sampled_sphere_box(c: &Vector3<f64>, r: f64, pose: &Pose, h: &Vector3<f64>) -> f64 {
    let local = pose.inverse().transform_point(c);
    let mut best = f64::INFINITY;
    for axis in 0..3 {
        let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
        for sign in [-1.0, 1.0] {
            let point = |a: f64, b: f64| {
                let mut p = Vector3::zeros();
                p[axis] = sign * h[axis];
                p[u] = a;
                p[v] = b;
                (p - local).norm()
            };
            let n = 60;
            let (mut ba, mut bb, mut bd) = (0.0, 0.0, f64::INFINITY);
            let (mut su, mut sv) = (2.0 * h[u] / n as f64, 2.0 * h[v] / n as f64);
            for i in 0..=n {
                for j in 0..=n {
                    let a = -h[u] + su * i as f64;
                    let b = -h[v] + sv * j as f64;
                    let d = point(a, b);
                    if d < bd {
                        (ba, bb, bd) = (a, b, d);
                    }
                }
            }
            for _ in 0..6 {
                let (ca, cb) = (ba, bb);
                for i in -10..=10 {
                    for j in -10..=10 {
                        let a = (ca + su * i as f64 / 10.0).clamp(-h[u], h[u]);
                        let b = (cb + sv * j as f64 / 10.0).clamp(-h[v], h[v]);
                        let d = point(a, b);
                        if d < bd {
                            (ba, bb, bd) = (a, b, d);
                        }
                    }
                }
                su /= 5.0;
                sv /= 5.0;
            }
            best = best.min(bd);
        }
    }
    let inside = (0..3).all(|i| local[i].abs() <= h[i]);
    (if inside { -best } else { best }) - r
}

/// Sphere-box signed distance against surface sampling on `n` random pairs.
/// Both argument orders and the direct entry point must agree exactly.
pub fn sphere_box_vs_sampling(n: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let h = Vector3::new(
            rng.random_range(0.02..0.3),
            rng.random_range(0.02..0.3),
            rng.random_range(0.02..0.3),
        );
        let pose = random_pose(&mut rng, 3.1, 1.0);
        let c = pose.translation
            + Vector3::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
        let r = rng.random_range(0.01..0.1);
        let sphere = Shape::sphere(r).unwrap();
        let cuboid = Shape::cuboid(h).unwrap();
        let at = Pose::from_translation(c.x, c.y, c.z);
        let analytic = signed_distance(&sphere, &at, &cuboid, &pose);
        if analytic != signed_distance(&cuboid, &pose, &sphere, &at) || analytic != sphere_box(&c, r, &pose, &h) {
            return f64::INFINITY;
        }
        worst = worst.max((analytic - sampled_sphere_box(&c, r, &pose, &h)).abs());
    }
    worst
}

pub fn random_q(model: &RobotModel, rng: &mut ChaCha8Rng) -> JointVector {
    JointVector::from_iterator(model.dof(), model.limits().iter().map(|[lo, hi]| rng.random_range(*lo..=*hi)))
}

/// Geometric Jacobian of every frame against central differences of forward
/// kinematics (h = 1e-6) at `n` random configurations.
pub fn jacobian_vs_fd(name: &str, n: usize, seed: u64) -> f64 {
    let h = 1e-6;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = RobotModel::builtin(name).unwrap();
    let mut frames = vec![Frame::Base, Frame::Gripper];
    frames.extend((0..model.joints.len()).map(Frame::Link));
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let q = random_q(&model, &mut rng);
        for &frame in &frames {
            let jac = model.jacobian(&q, frame).unwrap();
            for col in 0..model.dof() {
                let mut qp = q.clone();
                let mut qm = q.clone();
                qp[col] += h;
                qm[col] -= h;
                let pp = model.forward_kinematics(&qp).unwrap().frame(frame).unwrap();
                let pm = model.forward_kinematics(&qm).unwrap().frame(frame).unwrap();
                let lin = (pp.translation - pm.translation) / (2.0 * h);
                let ang = (pp.rotation * pm.rotation.inverse()).scaled_axis() / (2.0 * h);
                for r in 0..3 {
                    worst = worst.max((jac[(r, col)] - lin[r]).abs());
                    worst = worst.max((jac[(r + 3, col)] - ang[r]).abs());
                }
            }
        }
    }
    worst
}

/// One prismatic joint along x with unit inertia: a double integrator.
pub const SLIDER: &str = "name slider
base fixed
link base
  sphere 0 0 0 0.01
joint x prismatic
  origin 0 0 0 0 0 0
  axis 1 0 0
  limits -10 10
  sphere 0 0 0 0.01
gripper
  origin 0 0 0 0 0 0
  sphere 0 0 0 0.01
";

/// Discrete LQR tracking solution of the 1-DoF double integrator with a
/// terminal position target, by the Riccati recursion.
pub fn riccati_controls(
    x0: Vector2<f64>,
    reference: &[Vector2<f64>],
    target: f64,
    w_x: f64,
    w_u: f64,
    w_d: f64,
    dt: f64,
) -> Vec<f64> {
    let a = Matrix2::new(1.0, dt, 0.0, 1.0);
    let b = Vector2::new(dt * dt, dt);
    let h = reference.len() - 1;
    let e1 = Vector2::new(1.0, 0.0);
    let mut p = Matrix2::identity() * w_x + e1 * e1.transpose() * w_d;
    let mut s = -(reference[h] * w_x) - e1 * (w_d * target);
    let mut gains = Vec::with_capacity(h);
    for t in (0..h).rev() {
        let quu = w_u + (b.transpose() * p * b)[0];
        let qux = b.transpose() * p * a;
        let qu = (b.transpose() * s)[0];
        let k_fb = -qux / quu;
        let k_ff = -qu / quu;
        gains.push((k_fb, k_ff));
        let new_p = Matrix2::identity() * w_x + a.transpose() * p * a - qux.transpose() * qux / quu;
        let new_s = -(reference[t] * w_x) + a.transpose() * s - qux.transpose() * (qu / quu);
        p = new_p;
        s = new_s;
    }
    gains.reverse();
    let mut x = x0;
    let mut out = Vec::with_capacity(h);
    for (k_fb, k_ff) in gains {
        let u = (k_fb * x)[0] + k_ff;
        x = a * x + b * u;
        out.push(u);
    }
    out
}

/// iLQR on the slider tracking a sinusoid with a terminal keyframe, against
/// the Riccati solution; infinite when the solver fails or the cost rises.
pub fn ilqr_vs_riccati() -> f64 {
    let model = parse_model(SLIDER).unwrap();
    let dt = 0.1;
    let h = 40;
    let one = |x: f64| JointVector::from_column_slice(&[x]);
    let reference: Vec<OcpState> = (0..=h)
        .map(|t| {
            let s = t as f64 * dt;
            OcpState { q: one(s.sin()), v: one(s.cos()) }
        })
        .collect();
    let (w_x, w_u, w_d, target) = (2.0, 0.1, 50.0, 0.8);
    let problem = OcpProblem {
        model: &model,
        space: None,
        dt,
        x0: OcpState { q: one(0.2), v: one(0.0) },
        reference: reference.clone(),
        phases: Vec::new(),
        keyframes: vec![Keyframe { index: h, target: Pose::from_translation(target, 0.0, 0.0) }],
        weights: OcpWeights { w_d, w_x, w_u, w_c: 0.0, w_b: 0.0, ..Default::default() },
    };
    let settings = SolverSettings { relax: false, ..Default::default() };
    let Ok(sol) = solve(&problem, vec![one(0.0); h], &settings) else { return f64::INFINITY };
    if !sol.converged || !sol.cost_history.windows(2).all(|w| w[1] <= w[0]) {
        return f64::INFINITY;
    }
    let refs: Vec<Vector2<f64>> = reference.iter().map(|x| Vector2::new(x.q[0], x.v[0])).collect();
    let oracle = riccati_controls(Vector2::new(0.2, 0.0), &refs, target, w_x, w_u, w_d, dt);
    sol.trajectory.controls.iter().zip(&oracle).map(|(u, o)| (u[0] - o).abs()).fold(0.0, f64::max)
}
