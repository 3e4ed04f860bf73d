use std::fmt;
use std::ops::Mul;

use nalgebra::{Matrix3, Matrix4, Quaternion, Translation3, UnitQuaternion, Vector3, Vector6};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::GeomError;

/// Quaternions further than this from unit norm are rejected on input.
pub const QUATERNION_REJECT_TOL: f64 = 1e-6;
/// Quaternions closer than this to unit norm are stored bit-for-bit.
const QUATERNION_KEEP_TOL: f64 = 1e-12;

/// Rigid transform in SE(3): a translation (meters) and a unit quaternion.
#[derive(Clone, Copy, PartialEq)]
pub struct Pose {
    pub translation: Vector3<f64>,
    pub rotation: UnitQuaternion<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl fmt::Debug for Pose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let q = self.rotation.quaternion();
        write!(
            f,
            "Pose(t=[{}, {}, {}], q_wxyz=[{}, {}, {}, {}])",
            self.translation.x, self.translation.y, self.translation.z, q.w, q.i, q.j, q.k
        )
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            translation: Vector3::zeros(),
            rotation: UnitQuaternion::identity(),
        }
    }

    pub fn new(translation: Vector3<f64>, rotation: UnitQuaternion<f64>) -> Self {
        Self {
            translation,
            rotation,
        }
    }

    pub fn from_translation(x: f64, y: f64, z: f64) -> Self {
        Self::new(Vector3::new(x, y, z), UnitQuaternion::identity())
    }

    pub fn from_rotation(rotation: UnitQuaternion<f64>) -> Self {
        Self::new(Vector3::zeros(), rotation)
    }

    /// Rotation of `angle` radians about `axis` (need not be normalized).
    pub fn from_axis_angle(axis: Vector3<f64>, angle: f64) -> Self {
        let axis = nalgebra::Unit::new_normalize(axis);
        Self::from_rotation(UnitQuaternion::from_axis_angle(&axis, angle))
    }

    /// Translation plus roll/pitch/yaw (fixed-axis XYZ, as in URDF origins).
    pub fn from_xyz_rpy(xyz: [f64; 3], rpy: [f64; 3]) -> Self {
        Self::new(
            Vector3::new(xyz[0], xyz[1], xyz[2]),
            UnitQuaternion::from_euler_angles(rpy[0], rpy[1], rpy[2]),
        )
    }

    /// Builds a pose from a (w, x, y, z) quaternion, applying the input policy:
    /// kept as-is when already unit to 1e-12, renormalized within 1e-6,
    /// rejected otherwise.
    pub fn from_wxyz(translation: [f64; 3], wxyz: [f64; 4]) -> Result<Self, GeomError> {
        let q = Quaternion::new(wxyz[0], wxyz[1], wxyz[2], wxyz[3]);
        let norm = q.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > QUATERNION_REJECT_TOL {
            return Err(GeomError::NonUnitQuaternion { norm });
        }
        let rotation = if (norm - 1.0).abs() <= QUATERNION_KEEP_TOL {
            UnitQuaternion::new_unchecked(q)
        } else {
            UnitQuaternion::new_normalize(q)
        };
        if translation.iter().any(|v| !v.is_finite()) {
            return Err(GeomError::NonFinite);
        }
        Ok(Self::new(Vector3::from(translation), rotation))
    }

    pub fn wxyz(&self) -> [f64; 4] {
        let q = self.rotation.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    pub fn inverse(&self) -> Self {
        let rotation = self.rotation.inverse();
        Self::new(-(rotation * self.translation), rotation)
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn transform_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        self.rotation.to_rotation_matrix().into_inner()
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0)
            .copy_from(&self.rotation_matrix());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    pub fn to_isometry(&self) -> nalgebra::Isometry3<f64> {
        nalgebra::Isometry3::from_parts(Translation3::from(self.translation), self.rotation)
    }

    /// Rotation angle in [0, π].
    pub fn angle(&self) -> f64 {
        self.rotation.angle()
    }

    /// Applies a yaw rotation about the pose's own z axis.
    pub fn rotated_about_local_z(&self, angle: f64) -> Self {
        Self::new(
            self.translation,
            self.rotation * UnitQuaternion::from_axis_angle(&Vector3::z_axis(), angle),
        )
    }

    /// Renormalizes the quaternion; used after long chains of products.
    pub fn renormalized(&self) -> Self {
        Self::new(
            self.translation,
            UnitQuaternion::new_normalize(*self.rotation.quaternion()),
        )
    }

    pub fn is_finite(&self) -> bool {
        self.translation.iter().all(|v| v.is_finite())
            && self.rotation.coords.iter().all(|v| v.is_finite())
    }

    /// Translational and rotational gap between two poses.
    pub fn error_to(&self, other: &Pose) -> (f64, f64) {
        let rel = self.inverse() * *other;
        (rel.translation.norm(), rel.angle())
    }

    /// Stacked (translation, rotation-vector) as a 6-vector; used for
    /// quick numerical comparisons only.
    pub fn as_vector6(&self) -> Vector6<f64> {
        let r = self.rotation.scaled_axis();
        Vector6::new(
            self.translation.x,
            self.translation.y,
            self.translation.z,
            r.x,
            r.y,
            r.z,
        )
    }
}

impl Mul for Pose {
    type Output = Pose;

    fn mul(self, rhs: Pose) -> Pose {
        Pose::new(
            self.translation + self.rotation * rhs.translation,
            self.rotation * rhs.rotation,
        )
    }
}

impl Mul<&Pose> for &Pose {
    type Output = Pose;

    fn mul(self, rhs: &Pose) -> Pose {
        *self * *rhs
    }
}

#[derive(Serialize, Deserialize)]
struct PoseRepr {
    translation_m: [f64; 3],
    rotation_wxyz: [f64; 4],
}

impl Serialize for Pose {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        PoseRepr {
            translation_m: [self.translation.x, self.translation.y, self.translation.z],
            rotation_wxyz: self.wxyz(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Pose {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = PoseRepr::deserialize(deserializer)?;
        Pose::from_wxyz(repr.translation_m, repr.rotation_wxyz).map_err(serde::de::Error::custom)
    }
}
