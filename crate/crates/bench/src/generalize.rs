//! Random variations of a task: start poses, goal poses, object shapes and
//! furniture position, with rejection of samples the robot cannot handle.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use demotamp::cspace::{ObjectId, Space};
use demotamp::demo::{Demonstration, PlanarDelta, PoseVariation, ShapeRef, VariationTarget};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::scene::{Scene, SceneError, Task};
use crate::tasks::{build_scene, cuboid_handles, environment_frame};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    #[default]
    None,
    StartPose,
    GoalPose,
    Object,
    Environment,
    Combined,
}

impl Scenario {
    pub const ALL: [Scenario; 6] = [
        Scenario::None,
        Scenario::StartPose,
        Scenario::GoalPose,
        Scenario::Object,
        Scenario::Environment,
        Scenario::Combined,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Scenario::None => "none",
            Scenario::StartPose => "start-pose",
            Scenario::GoalPose => "goal-pose",
            Scenario::Object => "object",
            Scenario::Environment => "environment",
            Scenario::Combined => "combined",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.as_str() == s)
    }

    fn varies_start(self) -> bool {
        matches!(self, Scenario::StartPose | Scenario::Combined)
    }

    fn varies_goal(self) -> bool {
        matches!(self, Scenario::GoalPose | Scenario::Combined)
    }

    fn varies_object(self) -> bool {
        matches!(self, Scenario::Object | Scenario::Combined)
    }

    fn varies_environment(self) -> bool {
        matches!(self, Scenario::Environment | Scenario::Combined)
    }
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Planar displacement bounds for object poses, in the anchor frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoseBounds {
    pub dx: [f64; 2],
    pub dy: [f64; 2],
    pub dtheta: [f64; 2],
}

impl PoseBounds {
    fn symmetric(d: f64) -> Self {
        Self {
            dx: [-d, d],
            dy: [-d, d],
            dtheta: [-PI, PI],
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> PlanarDelta {
        PlanarDelta {
            dx: uniform(rng, self.dx),
            dy: uniform(rng, self.dy),
            dtheta: uniform(rng, self.dtheta),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    /// Start pose displacement of every object.
    pub start: PoseBounds,
    /// Goal pose displacement of every object.
    pub goal: PoseBounds,
    /// World displacement of the moved furniture frame (x, y, z).
    pub environment: [[f64; 2]; 3],
}

impl Bounds {
    /// Furniture bounds of the original experiments; object pose bounds
    /// chosen so objects stay on their support surface.
    pub fn for_task(task: Task) -> Self {
        match task {
            Task::Shelf1 | Task::Shelf2 | Task::Shelf3 => Self {
                start: PoseBounds::symmetric(0.1),
                goal: PoseBounds::symmetric(0.05),
                environment: [[-0.5, 0.5], [0.0, 0.3], [-0.5, 0.5]],
            },
            Task::Tunnel => Self {
                start: PoseBounds::symmetric(0.05),
                goal: PoseBounds::symmetric(0.05),
                environment: [[-0.1, 0.1], [-0.5, 0.1], [0.0, 0.0]],
            },
            Task::Waiter => Self {
                start: PoseBounds::symmetric(0.1),
                goal: PoseBounds::symmetric(0.1),
                environment: [[-1.0, 1.0], [-2.0, 0.0], [-0.2, 0.0]],
            },
        }
    }
}

/// Upright boxes the object variation swaps in; all fit the gripper.
pub const OBJECT_CATALOGUE: [(&str, [f64; 3]); 4] = [
    ("cuboid", [0.05, 0.05, 0.12]),
    ("block", [0.06, 0.06, 0.09]),
    ("stick", [0.04, 0.04, 0.16]),
    ("carton", [0.06, 0.04, 0.10]),
];

/// Tries per handle before a transition counts as infeasible.
pub const GRASPABILITY_ATTEMPTS: usize = 20;
/// Variations drawn before giving up on a seed.
pub const MAX_RESAMPLES: usize = 50;

fn uniform(rng: &mut ChaCha8Rng, b: [f64; 2]) -> f64 {
    if b[1] > b[0] {
        rng.random_range(b[0]..=b[1])
    } else {
        b[0]
    }
}

/// A varied task instance.
#[derive(Clone, Debug)]
pub struct Variation {
    pub scene: Scene,
    pub demo: Demonstration,
    /// Number of draws, including the accepted one.
    pub draws: usize,
    /// False when every draw failed the graspability test; the last draw is
    /// returned anyway.
    pub graspable: bool,
}

/// Draws one variation without the graspability test.
pub fn draw(task: Task, robot: &str, scenario: Scenario, bounds: &Bounds, rng: &mut ChaCha8Rng) -> Result<(Scene, Demonstration), SceneError> {
    let (mut scene, mut demo) = build_scene(task, robot);
    let objects: Vec<ObjectId> = demo.objects.keys().cloned().collect();
    if scenario.varies_object() && task != Task::Tunnel {
        for id in &objects {
            let (name, size) = OBJECT_CATALOGUE[rng.random_range(0..OBJECT_CATALOGUE.len())];
            demo = swap_upright(&demo, id, ShapeRef::new_box(name, size))?;
            scene.handles.insert(id.clone(), cuboid_handles(size[2]));
        }
    }
    for (varies, target, b) in [
        (scenario.varies_start(), VariationTarget::Start, bounds.start),
        (scenario.varies_goal(), VariationTarget::Goal, bounds.goal),
    ] {
        if varies {
            let deltas: BTreeMap<ObjectId, PlanarDelta> = objects.iter().map(|id| (id.clone(), b.sample(rng))).collect();
            demo = demo
                .vary_poses(&PoseVariation { target, deltas })
                .map_err(|e| SceneError::Invalid(e.to_string()))?;
        }
    }
    if scenario.varies_environment() {
        let frame = environment_frame(task);
        let d: Vec<f64> = bounds.environment.iter().map(|b| uniform(rng, *b)).collect();
        let mut pose = demo.frames[frame].pose;
        pose.translation.x += d[0];
        pose.translation.y += d[1];
        pose.translation.z += d[2];
        demo = demo.reanchor(frame, pose).map_err(|e| SceneError::Invalid(e.to_string()))?;
        if scene.goal_base_frame.as_deref() == Some(frame) {
            scene.goal_q[0] += d[0];
            scene.goal_q[1] += d[1];
        }
    }
    Ok((scene, demo))
}

/// Replaces an object's shape and shifts its poses so it still rests on the
/// same surfaces (all demonstrated poses are upright).
fn swap_upright(demo: &Demonstration, id: &ObjectId, shape: ShapeRef) -> Result<Demonstration, SceneError> {
    let old = demo.objects[id].shape();
    let new = shape.shape();
    let lift = new.half_height() - old.half_height();
    let mut out = demo.swap_object(id, shape).map_err(|e| SceneError::Invalid(e.to_string()))?;
    for ev in &mut out.events {
        if let Some(p) = ev.poses.get_mut(id) {
            p.pose.translation.z += lift;
        }
    }
    out.validate().map_err(|e| SceneError::Invalid(e.to_string()))?;
    Ok(out)
}

/// Every demonstrated move (grasp at one event, release at the next event of
/// that object) has a handle for which both transitions yield a free pair
/// within [`GRASPABILITY_ATTEMPTS`] projections each. Start and goal query
/// configurations must be free as well.
pub fn is_graspable(space: &Space, scene: &Scene, demo: &Demonstration, rng: &mut ChaCha8Rng) -> bool {
    let (start, goal) = scene.query(space);
    if !space.is_free(&start) || !space.is_free(&goal) {
        return false;
    }
    let feasible = |pos: usize, handle: usize, rng: &mut ChaCha8Rng| {
        let Some(t) = space
            .graph
            .transitions_at_event(pos)
            .into_iter()
            .find(|t| t.handle == handle)
        else {
            return false;
        };
        (0..GRASPABILITY_ATTEMPTS).any(|_| {
            space
                .sample_transition(t, rng)
                .is_ok_and(|(a, b)| space.is_free(&a) && space.is_free(&b))
        })
    };
    demo.moves().iter().all(|m| {
        let handles = space.graph.handles[&m.object].len();
        (0..handles).any(|h| feasible(m.grasp, h, rng) && feasible(m.release, h, rng))
    })
}

/// Draws variations until one passes [`is_graspable`], at most
/// [`MAX_RESAMPLES`] times. `Scenario::None` returns the nominal task.
pub fn sample_variation(
    task: Task,
    robot: &str,
    scenario: Scenario,
    bounds: &Bounds,
    rng: &mut ChaCha8Rng,
) -> Result<Variation, SceneError> {
    let mut last = None;
    for draws in 1..=MAX_RESAMPLES {
        let (scene, demo) = draw(task, robot, scenario, bounds, rng)?;
        if scenario == Scenario::None {
            return Ok(Variation {
                scene,
                demo,
                draws,
                graspable: true,
            });
        }
        let space = scene.space(&demo)?;
        if is_graspable(&space, &scene, &demo, rng) {
            return Ok(Variation {
                scene,
                demo,
                draws,
                graspable: true,
            });
        }
        last = Some((scene, demo));
    }
    let (scene, demo) = last.expect("at least one draw");
    Ok(Variation {
        scene,
        demo,
        draws: MAX_RESAMPLES,
        graspable: false,
    })
}
