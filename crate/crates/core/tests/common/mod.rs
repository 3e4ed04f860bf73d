#![allow(dead_code)]

use std::collections::BTreeMap;
use std::f64::consts::PI;

use demotamp::cspace::{Body, Handle, ObjectId, ObjectPlacement, Space};
use demotamp::demo::{AnchoredPose, Contact, ContactEvent, Demonstration, ShapeRef};
use demotamp::robot::{JointVector, RobotModel};
use demotamp::{Pose, Shape};
use nalgebra::{UnitQuaternion, Vector3};

pub const CUBE: [f64; 3] = [0.05, 0.05, 0.12];
pub const READY: [f64; 7] = [0.0, -0.3, 0.0, -2.2, 0.0, 1.9, 0.785];

pub fn upright(x: f64, y: f64, yaw: f64) -> Pose {
    Pose::new(
        Vector3::new(x, y, CUBE[2] / 2.0 + 1e-3),
        UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw),
    )
}

/// Top-down grasps rotated about the object's vertical axis.
pub fn top_handles(object: &str, count: usize) -> Vec<Handle> {
    (0..count)
        .map(|i| {
            let yaw = PI * i as f64 / count as f64;
            let down = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw)
                * UnitQuaternion::from_axis_angle(&Vector3::x_axis(), PI);
            Handle {
                object: ObjectId::new(object),
                grip: Pose::new(Vector3::new(0.0, 0.0, 0.03), down),
                label: format!("top{i}"),
            }
        })
        .collect()
}

/// Builds a demonstration by applying `moves` (object, new world pose) in order
/// to the `start` poses; every move is one grasp event and one release event.
pub fn demo(start: &[(&str, Pose)], moves: &[(&str, Pose)]) -> Demonstration {
    let objects = start
        .iter()
        .map(|(id, _)| (ObjectId::new(*id), ShapeRef::new_box("cube", CUBE)))
        .collect();
    let mut poses: BTreeMap<ObjectId, AnchoredPose> = start
        .iter()
        .map(|(id, p)| (ObjectId::new(*id), AnchoredPose { frame: "world".into(), pose: *p }))
        .collect();
    let mut events = Vec::new();
    let mut push = |poses: &BTreeMap<ObjectId, AnchoredPose>, id: &str, c: Contact| {
        let mut contacts: BTreeMap<ObjectId, Contact> = poses.keys().map(|k| (k.clone(), Contact::None)).collect();
        contacts.insert(ObjectId::new(id), c);
        events.push(ContactEvent { k: events.len() + 1, contacts, poses: poses.clone() });
    };
    for (id, to) in moves {
        push(&poses, id, Contact::Grasp);
        poses.get_mut(&ObjectId::new(*id)).unwrap().pose = *to;
        push(&poses, id, Contact::Release);
    }
    if moves.is_empty() {
        let id = start[0].0;
        let mut contacts: BTreeMap<ObjectId, Contact> = poses.keys().map(|k| (k.clone(), Contact::None)).collect();
        contacts.insert(ObjectId::new(id), Contact::None);
        events.push(ContactEvent { k: 1, contacts, poses: poses.clone() });
    }
    let d = Demonstration { objects, frames: BTreeMap::new(), events };
    d.validate().unwrap();
    d
}

pub fn table() -> Body {
    Body {
        name: "table".into(),
        shape: Shape::box_from_size([0.8, 1.2, 0.05]).unwrap(),
        placement: ObjectPlacement::world(Pose::from_translation(0.6, 0.0, -0.025)),
    }
}

pub fn handles(objects: &[&str], count: usize) -> BTreeMap<ObjectId, Vec<Handle>> {
    objects.iter().map(|o| (ObjectId::new(*o), top_handles(o, count))).collect()
}

/// Panda arm at the origin, a table and two cubes; `a` moves across the table
/// and then `b` moves next to it.
pub fn two_cube_space() -> Space {
    let d = demo(
        &[("a", upright(0.5, -0.2, 0.0)), ("b", upright(0.45, 0.25, 0.3))],
        &[("a", upright(0.55, 0.05, 0.5)), ("b", upright(0.4, -0.15, 0.0))],
    );
    Space::new(RobotModel::builtin("panda7").unwrap(), vec![table()], &d, &handles(&["a", "b"], 2)).unwrap()
}

pub fn ready() -> JointVector {
    JointVector::from_column_slice(&READY)
}
