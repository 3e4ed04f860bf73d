//! SE(3) exponential and logarithm maps.
//!
//! Twists are ordered `(linear, angular)`. The logarithm is taken of the
//! relative transform `a⁻¹ ∘ b`, i.e. the twist expressed in `a`'s frame that
//! carries `a` onto `b`.

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3, Vector6};

use super::Pose;

/// Below this angle the cancelling coefficients switch to Taylor series
/// (truncation error below 1e-17 there).
const SMALL_ANGLE: f64 = 1e-2;

/// Element of se(3) in exponential coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Twist {
    pub linear: Vector3<f64>,
    pub angular: Vector3<f64>,
}

impl Twist {
    pub fn new(linear: Vector3<f64>, angular: Vector3<f64>) -> Self {
        Self { linear, angular }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        Self::new(
            Vector3::new(v[0], v[1], v[2]),
            Vector3::new(v[3], v[4], v[5]),
        )
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::new(
            self.linear.x,
            self.linear.y,
            self.linear.z,
            self.angular.x,
            self.angular.y,
            self.angular.z,
        )
    }

    pub fn norm_squared(&self) -> f64 {
        self.linear.norm_squared() + self.angular.norm_squared()
    }

    /// Exponential map onto SE(3).
    pub fn exp(&self) -> Pose {
        let theta = self.angular.norm();
        let rotation = UnitQuaternion::from_scaled_axis(self.angular);
        let w = skew(&self.angular);
        let w2 = w * w;
        let t2 = theta * theta;
        let (b, c) = if theta < SMALL_ANGLE {
            (
                0.5 - t2 / 24.0 + t2 * t2 / 720.0,
                1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0,
            )
        } else {
            let s = (0.5 * theta).sin();
            (2.0 * s * s / t2, (theta - theta.sin()) / (t2 * theta))
        };
        let v = Matrix3::identity() + w * b + w2 * c;
        Pose::new(v * self.linear, rotation)
    }

    /// Logarithm of a single pose.
    ///
    /// For a rotation of exactly π the axis sign is fixed so that the axis
    /// component with the largest magnitude (equivalently, the largest
    /// diagonal entry of the rotation matrix) is positive.
    pub fn log(pose: &Pose) -> Twist {
        let q = pose.rotation.quaternion();
        // Canonical hemisphere w >= 0 keeps the angle in [0, π].
        let (w, v) = if q.w < 0.0 {
            (-q.w, -q.imag())
        } else {
            (q.w, q.imag())
        };
        let sin_half = v.norm();
        let angular = if sin_half < 1e-300 {
            Vector3::zeros()
        } else {
            let theta = 2.0 * sin_half.atan2(w);
            let mut axis = v / sin_half;
            if w == 0.0 {
                let imax = axis.iamax();
                if axis[imax] < 0.0 {
                    axis = -axis;
                }
            }
            axis * theta
        };
        let theta = angular.norm();
        let w_hat = skew(&angular);
        let coeff = if theta < SMALL_ANGLE {
            let t2 = theta * theta;
            1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0
        } else {
            let half = 0.5 * theta;
            (1.0 - half * half.cos() / half.sin()) / (theta * theta)
        };
        let v_inv = Matrix3::identity() - w_hat * 0.5 + w_hat * w_hat * coeff;
        Twist::new(v_inv * pose.translation, angular)
    }
}

/// Cross-product matrix `[v]×`.
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// `log(a⁻¹ ∘ b)`: zero iff `a == b`.
pub fn se3_log(a: &Pose, b: &Pose) -> Twist {
    Twist::log(&(a.inverse() * *b))
}

/// Squared norm of `se3_log(a, b)`; symmetric in its arguments.
pub fn pose_distance_sq(a: &Pose, b: &Pose) -> f64 {
    se3_log(a, b).norm_squared()
}

/// `a ∘ exp(t)`.
pub fn se3_retract(a: &Pose, t: &Twist) -> Pose {
    *a * t.exp()
}

/// Quaternion with a π rotation about `axis`; exposed for branch tests.
pub fn half_turn(axis: Vector3<f64>) -> UnitQuaternion<f64> {
    let a = axis.normalize();
    UnitQuaternion::new_unchecked(Quaternion::new(0.0, a.x, a.y, a.z))
}
