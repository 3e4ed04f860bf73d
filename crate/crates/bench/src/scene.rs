//! Scene description: furniture, support regions, handles, robot and the
//! query configurations. Furniture and regions hang off the demonstration's
//! anchor frames, so moving a frame moves everything resting on it.

use std::collections::BTreeMap;

use demotamp::cspace::{Body, Configuration, Handle, Mount, ObjectId, ObjectPlacement, Space};
use demotamp::demo::{Attachment, Demonstration, WORLD_FRAME};
use demotamp::planner::SurfaceRegion;
use demotamp::robot::{Frame, JointVector, RobotModel};
use demotamp::{Pose, Shape};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SCENE_FORMAT: &str = "demotamp-scene/1";

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("unknown task `{0}` (expected shelf-1, shelf-2, shelf-3, tunnel or waiter)")]
    UnknownTask(String),
    #[error("scene refers to unknown anchor frame `{0}`")]
    UnknownFrame(String),
    #[error("invalid scene: {0}")]
    Invalid(String),
    #[error(transparent)]
    Robot(#[from] demotamp::robot::RobotError),
    #[error(transparent)]
    Cspace(#[from] demotamp::cspace::CspaceError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Task {
    #[serde(rename = "shelf-1")]
    Shelf1,
    #[serde(rename = "shelf-2")]
    Shelf2,
    #[serde(rename = "shelf-3")]
    Shelf3,
    #[serde(rename = "tunnel")]
    Tunnel,
    #[serde(rename = "waiter")]
    Waiter,
}

impl Task {
    pub const ALL: [Task; 5] = [Task::Shelf1, Task::Shelf2, Task::Shelf3, Task::Tunnel, Task::Waiter];

    pub fn as_str(&self) -> &'static str {
        match self {
            Task::Shelf1 => "shelf-1",
            Task::Shelf2 => "shelf-2",
            Task::Shelf3 => "shelf-3",
            Task::Tunnel => "tunnel",
            Task::Waiter => "waiter",
        }
    }

    pub fn parse(s: &str) -> Result<Self, SceneError> {
        Self::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| SceneError::UnknownTask(s.to_string()))
    }

    pub fn is_shelf(&self) -> bool {
        matches!(self, Task::Shelf1 | Task::Shelf2 | Task::Shelf3)
    }
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A static body expressed in an anchor frame of the demonstration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Furniture {
    pub name: String,
    pub frame: String,
    pub pose: Pose,
    pub shape: Shape,
}

/// Rectangle `x × y` at `height` in an anchor frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub name: String,
    pub frame: String,
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub height: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HandleSpec {
    pub label: String,
    /// Gripper frame relative to the object frame.
    pub grip: Pose,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub format: String,
    pub task: Task,
    pub robot: String,
    /// World pose of the robot root.
    pub base_pose: Pose,
    pub furniture: Vec<Furniture>,
    pub regions: Vec<Region>,
    pub handles: BTreeMap<ObjectId, Vec<HandleSpec>>,
    pub start_q: Vec<f64>,
    pub goal_q: Vec<f64>,
    /// For mobile robots: the goal base position follows this anchor frame
    /// when the frame is moved.
    #[serde(default)]
    pub goal_base_frame: Option<String>,
}

fn frame_placement(demo: &Demonstration, frame: &str, pose: Pose) -> Result<ObjectPlacement, SceneError> {
    if frame == WORLD_FRAME {
        return Ok(ObjectPlacement::world(pose));
    }
    let f = demo
        .frames
        .get(frame)
        .ok_or_else(|| SceneError::UnknownFrame(frame.to_string()))?;
    Ok(match f.attached_to {
        None => ObjectPlacement::world(f.pose * pose),
        Some(Attachment::RobotBase) => ObjectPlacement {
            pose: f.pose * pose,
            mount: Mount::Robot(Frame::Base),
        },
    })
}

impl Scene {
    pub fn robot_model(&self) -> Result<RobotModel, SceneError> {
        Ok(RobotModel::builtin(&self.robot)?.with_mount(self.base_pose))
    }

    pub fn validate(&self, demo: &Demonstration) -> Result<(), SceneError> {
        for f in &self.furniture {
            f.shape
                .validate()
                .map_err(|e| SceneError::Invalid(format!("furniture `{}`: {e}", f.name)))?;
            frame_placement(demo, &f.frame, f.pose)?;
        }
        for r in &self.regions {
            if !(r.x[1] > r.x[0] && r.y[1] > r.y[0]) {
                return Err(SceneError::Invalid(format!("region `{}` has no area", r.name)));
            }
            frame_placement(demo, &r.frame, Pose::identity())?;
        }
        let model = self.robot_model()?;
        for (which, q) in [("start", &self.start_q), ("goal", &self.goal_q)] {
            if q.len() != model.dof() {
                return Err(SceneError::Invalid(format!(
                    "{which} configuration has {} joints, {} has {}",
                    q.len(),
                    model.name,
                    model.dof()
                )));
            }
        }
        for id in demo.objects.keys() {
            if self.handles.get(id).is_none_or(|h| h.is_empty()) {
                return Err(SceneError::Invalid(format!("object `{id}` has no handle")));
            }
        }
        Ok(())
    }

    pub fn bodies(&self, demo: &Demonstration) -> Result<Vec<Body>, SceneError> {
        self.furniture
            .iter()
            .map(|f| {
                Ok(Body {
                    name: f.name.clone(),
                    shape: f.shape,
                    placement: frame_placement(demo, &f.frame, f.pose)?,
                })
            })
            .collect()
    }

    pub fn handle_map(&self) -> BTreeMap<ObjectId, Vec<Handle>> {
        self.handles
            .iter()
            .map(|(id, hs)| {
                let list = hs
                    .iter()
                    .map(|h| Handle {
                        object: id.clone(),
                        grip: h.grip,
                        label: h.label.clone(),
                    })
                    .collect();
                (id.clone(), list)
            })
            .collect()
    }

    pub fn surface_regions(&self, demo: &Demonstration) -> Result<Vec<SurfaceRegion>, SceneError> {
        self.regions
            .iter()
            .map(|r| {
                let p = frame_placement(demo, &r.frame, Pose::identity())?;
                Ok(SurfaceRegion {
                    name: r.name.clone(),
                    mount: p.mount,
                    frame: p.pose,
                    x: r.x,
                    y: r.y,
                    height: r.height,
                })
            })
            .collect()
    }

    pub fn space(&self, demo: &Demonstration) -> Result<Space, SceneError> {
        self.validate(demo)?;
        Ok(Space::new(self.robot_model()?, self.bodies(demo)?, demo, &self.handle_map())?)
    }

    /// Start and goal configurations of the query.
    pub fn query(&self, space: &Space) -> (Configuration, Configuration) {
        let start = space.configuration(JointVector::from_column_slice(&self.start_q), space.graph.start_state());
        let goal = space.configuration(JointVector::from_column_slice(&self.goal_q), space.graph.goal_state());
        (start, goal)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serializes")
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, SceneError> {
        let scene: Scene = serde_json::from_slice(bytes)?;
        if scene.format != SCENE_FORMAT {
            return Err(SceneError::Invalid(format!(
                "format `{}`, expected `{SCENE_FORMAT}`",
                scene.format
            )));
        }
        Ok(scene)
    }
}
