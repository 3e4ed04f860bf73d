//! Rigid transforms, SE(3) log/exp and sphere/box distance queries.

mod lie;
mod pose;
mod shape;

pub use lie::{half_turn, pose_distance_sq, se3_log, se3_retract, skew, Twist};
pub use pose::{Pose, QUATERNION_REJECT_TOL};
pub use shape::{box_box, point_box, signed_distance, sphere_box, sphere_sphere, Geometry, Shape};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("quaternion norm {norm} is not within 1e-6 of 1")]
    NonUnitQuaternion { norm: f64 },
    #[error("non-finite pose component")]
    NonFinite,
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("unsupported shape kind `{0}` (supported: sphere, box)")]
    UnsupportedShape(String),
}
