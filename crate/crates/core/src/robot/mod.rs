//! Serial-chain kinematics with an optional holonomic planar base.
//!
//! The configuration vector is laid out as `[x, y, yaw]` (mobile models only)
//! followed by one coordinate per joint. Collision geometry is a chain of
//! spheres per link.

mod format;

use nalgebra::{DMatrix, DVector, Unit, Vector3};
use thiserror::Error;

use crate::geom::{Pose, Twist};

pub use format::parse_model;

/// Joint-space configuration of a robot (radians / meters).
pub type JointVector = DVector<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RobotError {
    #[error("configuration has {got} coordinates, model `{model}` has {expected} DoFs")]
    DimensionMismatch {
        model: String,
        expected: usize,
        got: usize,
    },
    #[error("unknown frame {0:?}")]
    UnknownFrame(Frame),
    #[error("unknown built-in robot `{0}` (known: panda7, ur5ish, kmr)")]
    UnknownModel(String),
    #[error("model file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid model: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JointKind {
    Revolute,
    Prismatic,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Joint {
    pub name: String,
    pub kind: JointKind,
    pub axis: Unit<Vector3<f64>>,
    /// Joint frame relative to the parent link frame at zero displacement.
    pub origin: Pose,
    pub limits: [f64; 2],
}

impl Joint {
    fn motion(&self, value: f64) -> Pose {
        match self.kind {
            JointKind::Revolute => Pose::from_axis_angle(self.axis.into_inner(), value),
            JointKind::Prismatic => {
                let t = self.axis.into_inner() * value;
                Pose::from_translation(t.x, t.y, t.z)
            }
        }
    }
}

/// Frames addressable on a robot: the (possibly moving) base link, the child
/// link of each joint, and the gripper.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    Base,
    Link(usize),
    Gripper,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkSphere {
    pub frame: Frame,
    pub center: Vector3<f64>,
    pub radius: f64,
}

/// A collision sphere placed in the world.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WorldSphere {
    pub frame: Frame,
    pub center: Vector3<f64>,
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RobotModel {
    pub name: String,
    /// Where the robot root is attached in the world.
    pub mount: Pose,
    /// Limits for `(x, y, yaw)` when the base is mobile.
    pub planar_base: Option<[[f64; 2]; 3]>,
    pub joints: Vec<Joint>,
    pub gripper_offset: Pose,
    pub spheres: Vec<LinkSphere>,
    /// Frames whose spheres are not tested against the grasped object.
    pub grasp_exclude: Vec<Frame>,
    /// Diagonal of the joint-space inertia used by trajectory refinement.
    pub inertia: Vec<f64>,
}

/// Forward-kinematics result.
#[derive(Clone, Debug, PartialEq)]
pub struct LinkPoses {
    pub base: Pose,
    pub links: Vec<Pose>,
    pub gripper: Pose,
}

impl LinkPoses {
    pub fn frame(&self, frame: Frame) -> Option<Pose> {
        match frame {
            Frame::Base => Some(self.base),
            Frame::Link(i) => self.links.get(i).copied(),
            Frame::Gripper => Some(self.gripper),
        }
    }
}

const PANDA7: &str = include_str!("../../models/panda7.robot");
const UR5ISH: &str = include_str!("../../models/ur5ish.robot");
const KMR: &str = include_str!("../../models/kmr.robot");

impl RobotModel {
    /// One of the shipped models: `panda7`, `ur5ish` or `kmr`.
    pub fn builtin(name: &str) -> Result<Self, RobotError> {
        let text = match name {
            "panda7" => PANDA7,
            "ur5ish" => UR5ISH,
            "kmr" => KMR,
            other => return Err(RobotError::UnknownModel(other.to_string())),
        };
        parse_model(text)
    }

    pub fn builtin_names() -> &'static [&'static str] {
        &["panda7", "ur5ish", "kmr"]
    }

    pub fn with_mount(mut self, mount: Pose) -> Self {
        self.mount = mount;
        self
    }

    pub fn is_mobile(&self) -> bool {
        self.planar_base.is_some()
    }

    fn base_dofs(&self) -> usize {
        if self.is_mobile() {
            3
        } else {
            0
        }
    }

    pub fn dof(&self) -> usize {
        self.joints.len() + self.base_dofs()
    }

    /// Closed interval per coordinate, in configuration order.
    pub fn limits(&self) -> Vec<[f64; 2]> {
        let mut out = Vec::with_capacity(self.dof());
        if let Some(base) = self.planar_base {
            out.extend_from_slice(&base);
        }
        out.extend(self.joints.iter().map(|j| j.limits));
        out
    }

    pub fn validate(&self) -> Result<(), RobotError> {
        for (i, [lo, hi]) in self.limits().into_iter().enumerate() {
            if !(lo < hi) {
                return Err(RobotError::Invalid(format!(
                    "coordinate {i}: lower limit {lo} must be below upper limit {hi}"
                )));
            }
        }
        for i in 0..self.joints.len() {
            if !self.spheres.iter().any(|s| s.frame == Frame::Link(i)) {
                return Err(RobotError::Invalid(format!(
                    "link of joint `{}` has no collision sphere",
                    self.joints[i].name
                )));
            }
        }
        if self.spheres.iter().any(|s| !(s.radius > 0.0)) {
            return Err(RobotError::Invalid("sphere radius must be > 0".into()));
        }
        if self.inertia.len() != self.dof() || self.inertia.iter().any(|m| !(*m > 0.0)) {
            return Err(RobotError::Invalid(format!(
                "inertia needs {} positive entries",
                self.dof()
            )));
        }
        Ok(())
    }

    fn check_dim(&self, q: &JointVector) -> Result<(), RobotError> {
        if q.len() != self.dof() {
            return Err(RobotError::DimensionMismatch {
                model: self.name.clone(),
                expected: self.dof(),
                got: q.len(),
            });
        }
        Ok(())
    }

    pub fn forward_kinematics(&self, q: &JointVector) -> Result<LinkPoses, RobotError> {
        self.check_dim(q)?;
        Ok(self.fk_unchecked(q.as_slice()))
    }

    /// FK for a slice already known to have the right length.
    pub fn fk_unchecked(&self, q: &[f64]) -> LinkPoses {
        let nb = self.base_dofs();
        let base = if self.is_mobile() {
            self.mount
                * Pose::from_translation(q[0], q[1], 0.0)
                * Pose::from_axis_angle(Vector3::z(), q[2])
        } else {
            self.mount
        };
        let mut links = Vec::with_capacity(self.joints.len());
        let mut current = base;
        for (joint, value) in self.joints.iter().zip(&q[nb..]) {
            current = current * joint.origin * joint.motion(*value);
            links.push(current);
        }
        let gripper = current * self.gripper_offset;
        LinkPoses {
            base,
            links,
            gripper,
        }
    }

    pub fn gripper_pose(&self, q: &JointVector) -> Result<Pose, RobotError> {
        Ok(self.forward_kinematics(q)?.gripper)
    }

    /// Geometric Jacobian of `frame`'s origin, rows `(linear; angular)` in
    /// world coordinates. Columns of coordinates that do not move `frame`
    /// are zero.
    pub fn jacobian(&self, q: &JointVector, frame: Frame) -> Result<DMatrix<f64>, RobotError> {
        self.check_dim(q)?;
        let poses = self.fk_unchecked(q.as_slice());
        let target = poses.frame(frame).ok_or(RobotError::UnknownFrame(frame))?;
        Ok(self.jacobian_from_poses(q.as_slice(), &poses, frame, &target.translation))
    }

    /// Jacobian of the point `point` (world coordinates) rigidly attached to
    /// `frame`, using precomputed link poses.
    pub fn jacobian_from_poses(
        &self,
        q: &[f64],
        poses: &LinkPoses,
        frame: Frame,
        point: &Vector3<f64>,
    ) -> DMatrix<f64> {
        let n = self.dof();
        let nb = self.base_dofs();
        let mut jac = DMatrix::zeros(6, n);
        let moved_joints = match frame {
            Frame::Base => 0,
            Frame::Link(i) => (i + 1).min(self.joints.len()),
            Frame::Gripper => self.joints.len(),
        };
        if self.is_mobile() {
            let yaw_frame = self.mount * Pose::from_translation(q[0], q[1], 0.0);
            let ex = self.mount.transform_vector(&Vector3::x());
            let ey = self.mount.transform_vector(&Vector3::y());
            let ez = self.mount.transform_vector(&Vector3::z());
            jac.fixed_view_mut::<3, 1>(0, 0).copy_from(&ex);
            jac.fixed_view_mut::<3, 1>(0, 1).copy_from(&ey);
            let lever = point - yaw_frame.translation;
            jac.fixed_view_mut::<3, 1>(0, 2).copy_from(&ez.cross(&lever));
            jac.fixed_view_mut::<3, 1>(3, 2).copy_from(&ez);
        }
        for (i, joint) in self.joints.iter().enumerate().take(moved_joints) {
            let col = nb + i;
            // Joint i's axis lives in the frame reached after its motion.
            let frame_pose = poses.links[i];
            let axis = frame_pose.transform_vector(&joint.axis.into_inner());
            match joint.kind {
                JointKind::Revolute => {
                    let lever = point - frame_pose.translation;
                    jac.fixed_view_mut::<3, 1>(0, col).copy_from(&axis.cross(&lever));
                    jac.fixed_view_mut::<3, 1>(3, col).copy_from(&axis);
                }
                JointKind::Prismatic => {
                    jac.fixed_view_mut::<3, 1>(0, col).copy_from(&axis);
                }
            }
        }
        jac
    }

    /// True iff every coordinate lies in its closed limit interval.
    pub fn within_limits(&self, q: &JointVector) -> bool {
        q.len() == self.dof()
            && self
                .limits()
                .iter()
                .zip(q.iter())
                .all(|([lo, hi], v)| *v >= *lo && *v <= *hi)
    }

    pub fn clamp_to_limits(&self, q: &mut JointVector) {
        for ([lo, hi], v) in self.limits().iter().zip(q.iter_mut()) {
            *v = v.clamp(*lo, *hi);
        }
    }

    /// Midpoint of every limit interval.
    pub fn mid_configuration(&self) -> JointVector {
        JointVector::from_iterator(self.dof(), self.limits().iter().map(|[lo, hi]| 0.5 * (lo + hi)))
    }

    pub fn world_spheres(&self, poses: &LinkPoses, out: &mut Vec<WorldSphere>) {
        out.clear();
        out.extend(self.spheres.iter().map(|s| {
            let pose = poses.frame(s.frame).expect("sphere frame validated at load");
            WorldSphere {
                frame: s.frame,
                center: pose.transform_point(&s.center),
                radius: s.radius,
            }
        }));
    }

    pub fn excluded_from_grasp(&self, frame: Frame) -> bool {
        self.grasp_exclude.contains(&frame)
    }

    /// Upper bound on how far any collision sphere surface can travel per
    /// unit of joint-space distance; used to size collision-check steps.
    pub fn reach(&self) -> f64 {
        let mut total = 0.0;
        for j in &self.joints {
            total += j.origin.translation.norm();
        }
        total + self.gripper_offset.translation.norm() + 0.2
    }

    pub fn frame_name(&self, frame: Frame) -> String {
        match frame {
            Frame::Base => "base".into(),
            Frame::Link(i) => self.joints[i].name.clone(),
            Frame::Gripper => "gripper".into(),
        }
    }
}

/// Twist error taking `current` onto `target`, expressed in world axes:
/// translation difference and rotation vector of `target · current⁻¹`.
pub fn world_pose_error(current: &Pose, target: &Pose) -> nalgebra::Vector6<f64> {
    let dt = target.translation - current.translation;
    let dr = (target.rotation * current.rotation.inverse()).scaled_axis();
    nalgebra::Vector6::new(dt.x, dt.y, dt.z, dr.x, dr.y, dr.z)
}

/// Body-frame log error; re-exported for callers that want SE(3) units.
pub fn body_pose_error(current: &Pose, target: &Pose) -> Twist {
    crate::geom::se3_log(current, target)
}
