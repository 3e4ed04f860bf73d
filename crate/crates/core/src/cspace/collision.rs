//! Active collision pairs of a configuration.
//!
//! Robot spheres are tested against furniture and against every object;
//! the held object skips the robot frames listed in `grasp_exclude`, and
//! anything carried by a robot frame skips that frame's spheres. Objects are
//! tested against each other and against furniture. There is no robot
//! self-collision test.

use std::collections::BTreeMap;
use std::ops::ControlFlow;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{Mount, ObjectId, ObjectPlacement, StateManifold};
use crate::geom::{signed_distance, sphere_box, sphere_sphere, Geometry, Pose, Shape};
use crate::robot::{Frame, RobotModel, WorldSphere};

/// Static scene geometry: tables, shelves, tunnel walls, a tray.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Body {
    pub name: String,
    pub shape: Shape,
    pub placement: ObjectPlacement,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairKind {
    RobotFurniture,
    RobotObject,
    ObjectObject,
    ObjectFurniture,
}

pub(super) struct Placed<'a> {
    pub shape: &'a Shape,
    pub pose: Pose,
    /// Robot frames this body must not be tested against.
    pub skip: Skip<'a>,
    pub center: Vector3<f64>,
    pub radius: f64,
}

#[derive(Clone, Copy)]
pub(super) enum Skip<'a> {
    None,
    Frame(Frame),
    Frames(&'a [Frame]),
}

impl Skip<'_> {
    fn contains(&self, f: Frame) -> bool {
        match self {
            Skip::None => false,
            Skip::Frame(g) => *g == f,
            Skip::Frames(list) => list.contains(&f),
        }
    }
}

fn skip_for(mount: Mount) -> Skip<'static> {
    match mount {
        Mount::World => Skip::None,
        Mount::Robot(f) => Skip::Frame(f),
    }
}

pub(super) fn place<'a>(shape: &'a Shape, pose: Pose, skip: Skip<'a>) -> Placed<'a> {
    let w = pose * shape.local;
    let radius = match shape.geometry {
        Geometry::Sphere { radius } => radius,
        Geometry::Box { half_extents } => half_extents.norm(),
    };
    Placed {
        shape,
        pose,
        skip,
        center: w.translation,
        radius,
    }
}

fn sphere_to(s: &WorldSphere, b: &Placed) -> f64 {
    let w = b.pose * b.shape.local;
    match b.shape.geometry {
        Geometry::Sphere { radius } => sphere_sphere(&s.center, s.radius, &w.translation, radius),
        Geometry::Box { half_extents } => sphere_box(&s.center, s.radius, &w, &half_extents),
    }
}

/// Calls `visit` with the signed distance of every active pair. Pairs whose
/// bounding spheres are more than `cutoff` apart report that lower bound
/// instead of the exact value. Stops early when `visit` breaks.
pub(super) fn visit_pairs(
    spheres: &[WorldSphere],
    furniture: &[Placed],
    objects: &[Placed],
    cutoff: f64,
    visit: &mut dyn FnMut(PairKind, f64) -> ControlFlow<()>,
) -> ControlFlow<()> {
    for s in spheres {
        for (kind, bodies) in [(PairKind::RobotFurniture, furniture), (PairKind::RobotObject, objects)] {
            for b in bodies {
                if b.skip.contains(s.frame) {
                    continue;
                }
                let bound = (s.center - b.center).norm() - s.radius - b.radius;
                let d = if bound > cutoff { bound } else { sphere_to(s, b) };
                visit(kind, d)?;
            }
        }
    }
    for (i, a) in objects.iter().enumerate() {
        for b in &objects[i + 1..] {
            let bound = (a.center - b.center).norm() - a.radius - b.radius;
            let d = if bound > cutoff {
                bound
            } else {
                signed_distance(a.shape, &a.pose, b.shape, &b.pose)
            };
            visit(PairKind::ObjectObject, d)?;
        }
        for b in furniture {
            let bound = (a.center - b.center).norm() - a.radius - b.radius;
            let d = if bound > cutoff {
                bound
            } else {
                signed_distance(a.shape, &a.pose, b.shape, &b.pose)
            };
            visit(PairKind::ObjectFurniture, d)?;
        }
    }
    ControlFlow::Continue(())
}

/// Places every object of a configuration with its exclusion rule.
pub(super) fn place_objects<'a>(
    model: &'a RobotModel,
    shapes: &'a BTreeMap<ObjectId, Shape>,
    state: &StateManifold,
    poses: &BTreeMap<ObjectId, Pose>,
) -> Vec<Placed<'a>> {
    let held = state.grasped_object();
    shapes
        .iter()
        .map(|(id, shape)| {
            let pose = poses[id];
            let skip = if Some(id) == held {
                Skip::Frames(&model.grasp_exclude)
            } else {
                state.fixed.get(id).map(|p| skip_for(p.mount)).unwrap_or(Skip::None)
            };
            place(shape, pose, skip)
        })
        .collect()
}

pub(super) fn place_furniture<'a>(bodies: &'a [Body], links: &crate::robot::LinkPoses) -> Vec<Placed<'a>> {
    bodies
        .iter()
        .map(|b| place(&b.shape, b.placement.world_pose(links), skip_for(b.placement.mount)))
        .collect()
}
