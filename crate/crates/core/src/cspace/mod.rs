//! Admissible configuration space built from a demonstration: placement and
//! grasp manifolds, the transitions between them, constraint projection and
//! the collision test.
//!
//! Object poses are not planning coordinates. In a placement state every
//! object sits at its manifold pose; in a grasp state the held object follows
//! the gripper through its handle. The search space is the robot joint space,
//! and only transitions (gripper at `placement ∘ grip`) constrain the robot.

mod collision;
mod graph;
mod project;
mod space;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::demo::DemoError;
use crate::geom::Pose;
use crate::robot::{Frame, LinkPoses, RobotError};

pub use crate::demo::ObjectId;
pub use collision::{Body, PairKind};
pub use graph::{build_state_graph, Direction, StateGraph, Step, Transition};
pub use project::{project, PoseConstraint, ProjectionFailure, ProjectionParams};
pub use space::{linear_interpolate, Configuration, Residual, Space};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CspaceError {
    #[error(transparent)]
    Demo(#[from] DemoError),
    #[error(transparent)]
    Robot(#[from] RobotError),
    #[error("object `{0}` is moved in the demonstration but has no handle")]
    MissingHandles(ObjectId),
    #[error("handle refers to unknown object `{0}`")]
    UnknownObject(ObjectId),
    #[error("configurations belong to different states ({0} and {1})")]
    StateMismatch(StateId, StateId),
    #[error("unknown state {0}")]
    UnknownState(StateId),
    #[error("event position {0} carries no contact change")]
    NoTransition(usize),
}

/// Where a placed pose is expressed: world-fixed, or rigidly carried by a
/// robot frame (objects on a tray mounted on a mobile base).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mount {
    World,
    Robot(Frame),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectPlacement {
    pub pose: Pose,
    pub mount: Mount,
}

impl ObjectPlacement {
    pub fn world(pose: Pose) -> Self {
        Self {
            pose,
            mount: Mount::World,
        }
    }

    pub fn world_pose(&self, links: &LinkPoses) -> Pose {
        match self.mount {
            Mount::World => self.pose,
            Mount::Robot(f) => links.frame(f).expect("mount frame exists") * self.pose,
        }
    }
}

/// One way of holding an object: the gripper frame relative to the object.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Handle {
    pub object: ObjectId,
    pub grip: Pose,
    pub label: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateKind {
    Placement,
    Grasp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateId(pub usize);

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "S{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateManifold {
    pub kind: StateKind,
    /// Every object in a placement state, all but the held one otherwise.
    pub fixed: std::collections::BTreeMap<ObjectId, ObjectPlacement>,
    pub grasped: Option<Handle>,
}

impl StateManifold {
    pub fn placement(fixed: std::collections::BTreeMap<ObjectId, ObjectPlacement>) -> Self {
        Self {
            kind: StateKind::Placement,
            fixed,
            grasped: None,
        }
    }

    /// The grasp state obtained from placement `from` by picking `handle`'s
    /// object.
    pub fn grasp_from(from: &StateManifold, handle: Handle) -> Self {
        let mut fixed = from.fixed.clone();
        fixed.remove(&handle.object);
        Self {
            kind: StateKind::Grasp,
            fixed,
            grasped: Some(handle),
        }
    }

    pub fn is_placement(&self) -> bool {
        self.kind == StateKind::Placement
    }

    pub fn grasped_object(&self) -> Option<&ObjectId> {
        self.grasped.as_ref().map(|h| &h.object)
    }

    /// Structural invariants against the full object set.
    pub fn is_well_formed<'a>(&self, objects: impl Iterator<Item = &'a ObjectId>) -> bool {
        let mut missing = objects.filter(|o| !self.fixed.contains_key(*o));
        match (&self.kind, &self.grasped) {
            (StateKind::Placement, None) => missing.next().is_none(),
            (StateKind::Grasp, Some(h)) => {
                missing.next() == Some(&h.object) && missing.next().is_none()
            }
            _ => false,
        }
    }
}
