//! Scene and demonstration generators for the benchmark tasks.
//!
//! Dimensions are fixtures, not measurements: a 0.8 × 1.2 m table with its
//! surface at z = 0, a two-board shelf (boards at 0.3 and 0.8 m), a tunnel
//! 0.4 m long with a 0.19 × 0.17 m opening standing on a 0.6 × 1.2 m table,
//! and for the waiter two 0.72 m tables 2.5 m apart with a 0.4 × 0.3 m tray
//! on the mobile base. Objects rest 1 mm above their support so contact is
//! never a collision.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};

use demotamp::cspace::ObjectId;
use demotamp::demo::{
    AnchorFrame, AnchoredPose, Attachment, Contact, ContactEvent, Demonstration, ShapeRef,
};
use demotamp::{Pose, Shape};
use nalgebra::{UnitQuaternion, Vector3};

use crate::scene::{Furniture, HandleSpec, Region, Scene, Task, SCENE_FORMAT};

const GAP: f64 = 1e-3;

/// Small cuboid used on the shelf and in the waiter task.
pub const CUBOID: [f64; 3] = [0.05, 0.05, 0.12];
/// The long bar passed through the tunnel.
pub const BAR: [f64; 3] = [0.05, 0.30, 0.12];
/// Inner width, inner height, length and wall thickness of the tunnel.
pub const TUNNEL: (f64, f64, f64, f64) = (0.19, 0.17, 0.4, 0.02);

pub const PANDA_READY: [f64; 7] = [0.0, -0.3, 0.0, -2.2, 0.0, 1.9, 0.785];
pub const UR5_READY: [f64; 6] = [0.0, -1.2, 1.6, -1.9, -1.5708, 0.0];
const KMR_ARM_TUCK: [f64; 7] = [0.0, -0.6, 0.0, 1.9, 0.0, 0.8, 0.0];

fn yaw(theta: f64) -> UnitQuaternion<f64> {
    UnitQuaternion::from_axis_angle(&Vector3::z_axis(), theta)
}

fn pose(x: f64, y: f64, z: f64, theta: f64) -> Pose {
    Pose::new(Vector3::new(x, y, z), yaw(theta))
}

fn slab(name: &str, frame: &str, center: [f64; 3], size: [f64; 3]) -> Furniture {
    Furniture {
        name: name.into(),
        frame: frame.into(),
        pose: Pose::from_translation(center[0], center[1], center[2]),
        shape: Shape::box_from_size(size).expect("positive fixture size"),
    }
}

fn grip(t: [f64; 3], axis: Vector3<f64>, angle: f64, label: &str) -> HandleSpec {
    HandleSpec {
        label: label.into(),
        grip: Pose::new(
            Vector3::new(t[0], t[1], t[2]),
            UnitQuaternion::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle),
        ),
    }
}

/// Handles of an upright box of height `h`: from above, and horizontally
/// along ±x of the object with the fingers closing along y.
pub fn cuboid_handles(h: f64) -> Vec<HandleSpec> {
    vec![
        grip([0.0, 0.0, h / 2.0 - 0.025], Vector3::y(), PI, "top"),
        grip([0.0, 0.0, 0.02], Vector3::y(), FRAC_PI_2, "front"),
        grip([0.0, 0.0, 0.02], Vector3::y(), -FRAC_PI_2, "back"),
    ]
}

/// The bar is held by its ends along its long axis: `near` approaches along
/// +y of the bar at the −y end, `far` along −y at the +y end.
pub fn bar_handles() -> Vec<HandleSpec> {
    let inset = BAR[1] / 2.0 - 0.025;
    // z_g = ±y_obj, y_g = x_obj (fingers close across the 5 cm side).
    let near = UnitQuaternion::from_basis_unchecked(&[Vector3::new(0.0, 0.0, 1.0), Vector3::x(), Vector3::y()]);
    let far = UnitQuaternion::from_basis_unchecked(&[Vector3::new(0.0, 0.0, -1.0), Vector3::x(), -Vector3::y()]);
    vec![
        HandleSpec {
            label: "near".into(),
            grip: Pose::new(Vector3::new(0.0, -inset, 0.02), near),
        },
        HandleSpec {
            label: "far".into(),
            grip: Pose::new(Vector3::new(0.0, inset, 0.02), far),
        },
    ]
}

/// Incremental construction of a demonstration from pick and place steps.
struct Recorder {
    demo: Demonstration,
    poses: BTreeMap<ObjectId, AnchoredPose>,
}

impl Recorder {
    fn new() -> Self {
        Self {
            demo: Demonstration {
                objects: BTreeMap::new(),
                frames: BTreeMap::new(),
                events: Vec::new(),
            },
            poses: BTreeMap::new(),
        }
    }

    fn frame(&mut self, id: &str, pose: Pose, attached: bool) {
        self.demo.frames.insert(
            id.into(),
            AnchorFrame {
                pose,
                attached_to: attached.then_some(Attachment::RobotBase),
            },
        );
    }

    fn object(&mut self, id: &str, shape: ShapeRef, frame: &str, pose: Pose) {
        let id = ObjectId::new(id);
        self.demo.objects.insert(id.clone(), shape);
        self.poses.insert(
            id,
            AnchoredPose {
                frame: frame.into(),
                pose,
            },
        );
    }

    fn push(&mut self, id: &str, contact: Contact) {
        let contacts = self
            .demo
            .objects
            .keys()
            .map(|o| (o.clone(), if o.as_str() == id { contact } else { Contact::None }))
            .collect();
        self.demo.events.push(ContactEvent {
            k: self.demo.events.len() + 1,
            contacts,
            poses: self.poses.clone(),
        });
    }

    /// Grasp `id` where it lies, release it at `pose` in `frame`.
    fn pick_place(&mut self, id: &str, frame: &str, pose: Pose) {
        self.push(id, Contact::Grasp);
        self.poses.insert(
            ObjectId::new(id),
            AnchoredPose {
                frame: frame.into(),
                pose,
            },
        );
        self.push(id, Contact::Release);
    }

    fn finish(self) -> Demonstration {
        self.demo.validate().expect("generated demonstration is valid");
        self.demo
    }
}

fn table(furniture: &mut Vec<Furniture>) {
    furniture.push(slab("table", "table", [0.4, 0.0, -0.025], [0.8, 1.2, 0.05]));
}

/// Shelf geometry in the `shelf` frame, whose origin is the bottom of the
/// front edge, centred.
fn shelf(furniture: &mut Vec<Furniture>) {
    furniture.push(slab("shelf_board_low", "shelf", [0.15, 0.0, 0.29], [0.3, 0.6, 0.02]));
    furniture.push(slab("shelf_board_high", "shelf", [0.15, 0.0, 0.79], [0.3, 0.6, 0.02]));
    furniture.push(slab("shelf_side_left", "shelf", [0.15, 0.29, 0.4], [0.3, 0.02, 0.8]));
    furniture.push(slab("shelf_side_right", "shelf", [0.15, -0.29, 0.4], [0.3, 0.02, 0.8]));
    furniture.push(slab("shelf_back", "shelf", [0.31, 0.0, 0.4], [0.02, 0.6, 0.8]));
}

fn shelf_task(task: Task, robot: &str) -> (Scene, Demonstration) {
    let n = match task {
        Task::Shelf1 => 1,
        Task::Shelf2 => 2,
        _ => 3,
    };
    let rest = CUBOID[2] / 2.0 + GAP;
    let (starts, goals): (Vec<f64>, Vec<f64>) = match n {
        1 => (vec![-0.2], vec![0.0]),
        2 => (vec![-0.2, 0.2], vec![-0.12, 0.12]),
        _ => (vec![-0.2, 0.0, 0.2], vec![-0.15, 0.0, 0.15]),
    };
    let mut rec = Recorder::new();
    rec.frame("table", Pose::identity(), false);
    rec.frame("shelf", Pose::from_translation(0.45, 0.0, 0.0), false);
    let names: Vec<String> = (1..=n).map(|i| format!("cuboid{i}")).collect();
    for (name, y) in names.iter().zip(&starts) {
        rec.object(name, ShapeRef::new_box("cuboid", CUBOID), "table", pose(0.35, *y, rest, 0.0));
    }
    for (name, y) in names.iter().zip(&goals) {
        rec.pick_place(name, "shelf", pose(0.12, *y, 0.3 + rest, 0.0));
    }
    let mut furniture = Vec::new();
    table(&mut furniture);
    shelf(&mut furniture);
    let regions = vec![
        Region {
            name: "table".into(),
            frame: "table".into(),
            x: [0.2, 0.45],
            y: [-0.35, 0.35],
            height: 0.0,
        },
        Region {
            name: "shelf_board_low".into(),
            frame: "shelf".into(),
            x: [0.03, 0.25],
            y: [-0.24, 0.24],
            height: 0.3,
        },
    ];
    let handles = names
        .iter()
        .map(|n| (ObjectId::new(n.as_str()), cuboid_handles(CUBOID[2])))
        .collect();
    (arm_scene(task, robot, furniture, regions, handles), rec.finish())
}

fn arm_scene(
    task: Task,
    robot: &str,
    furniture: Vec<Furniture>,
    regions: Vec<Region>,
    handles: BTreeMap<ObjectId, Vec<HandleSpec>>,
) -> Scene {
    let ready: Vec<f64> = match robot {
        "ur5ish" => UR5_READY.to_vec(),
        _ => PANDA_READY.to_vec(),
    };
    Scene {
        format: SCENE_FORMAT.into(),
        task,
        robot: robot.into(),
        base_pose: Pose::identity(),
        furniture,
        regions,
        handles,
        start_q: ready.clone(),
        goal_q: ready,
        goal_base_frame: None,
    }
}

/// Tunnel along world y in front of the robot, on a table that starts 0.32 m
/// from the base so there is no free strip between robot and tunnel. The
/// bar starts on one side pointing at the robot, so only its `near` end is
/// reachable; at the goal only the `far` end is. Elsewhere on the table at
/// most one end is reachable for any pose, so the regrasp has to happen
/// inside the tunnel, which the hand enters with 1 cm to spare per side.
fn tunnel_task(robot: &str) -> (Scene, Demonstration) {
    let rest = BAR[2] / 2.0 + GAP;
    let mut rec = Recorder::new();
    rec.frame("table", Pose::identity(), false);
    rec.frame("tunnel", Pose::from_translation(0.45, 0.0, 0.0), false);
    rec.object("bar", ShapeRef::new_box("bar", BAR), "table", pose(0.52, -0.48, rest, -FRAC_PI_2));
    rec.pick_place("bar", "tunnel", pose(0.0, 0.0, rest, 0.0));
    rec.pick_place("bar", "table", pose(0.52, 0.48, rest, FRAC_PI_2));
    let (w, h, l, t) = TUNNEL;
    let furniture = vec![
        slab("table", "table", [0.62, 0.0, -0.025], [0.6, 1.2, 0.05]),
        slab("tunnel_left", "tunnel", [-(w + t) / 2.0, 0.0, (h + t) / 2.0], [t, l, h + t]),
        slab("tunnel_right", "tunnel", [(w + t) / 2.0, 0.0, (h + t) / 2.0], [t, l, h + t]),
        slab("tunnel_roof", "tunnel", [0.0, 0.0, h + t / 2.0], [w + 2.0 * t, l, t]),
    ];
    let regions = vec![
        Region {
            name: "table".into(),
            frame: "table".into(),
            x: [0.35, 0.9],
            y: [-0.55, 0.55],
            height: 0.0,
        },
    ];
    let handles = [(ObjectId::new("bar"), bar_handles())].into_iter().collect();
    (arm_scene(Task::Tunnel, robot, furniture, regions, handles), rec.finish())
}

/// Two objects carried from table A to table B on the tray of a mobile base.
fn waiter_task() -> (Scene, Demonstration) {
    let table_h = 0.72;
    let rest = CUBOID[2] / 2.0 + GAP;
    let tray_h = 0.02;
    let mut rec = Recorder::new();
    rec.frame("table_a", Pose::from_translation(1.15, 0.0, table_h), false);
    rec.frame("table_b", Pose::from_translation(1.15, 2.5, table_h), false);
    rec.frame("tray", Pose::from_translation(-0.2, 0.0, 0.72 + tray_h), true);
    let names = ["cuboid1", "cuboid2"];
    for (name, y) in names.iter().zip([-0.15, 0.15]) {
        rec.object(name, ShapeRef::new_box("cuboid", CUBOID), "table_a", pose(-0.15, y, rest, 0.0));
    }
    for (name, x) in names.iter().zip([-0.1, 0.1]) {
        rec.pick_place(name, "tray", pose(x, 0.0, rest, 0.0));
    }
    for (name, y) in names.iter().zip([-0.15, 0.15]) {
        rec.pick_place(name, "table_b", pose(-0.15, y, rest, 0.0));
    }
    let furniture = vec![
        slab("table_a", "table_a", [0.0, 0.0, -table_h / 2.0], [0.6, 0.8, table_h]),
        slab("table_b", "table_b", [0.0, 0.0, -table_h / 2.0], [0.6, 0.8, table_h]),
        slab("tray", "tray", [0.0, 0.0, -tray_h / 2.0], [0.4, 0.3, tray_h]),
    ];
    let regions = ["table_a", "table_b"]
        .into_iter()
        .map(|f| Region {
            name: f.into(),
            frame: f.into(),
            x: [-0.25, 0.0],
            y: [-0.3, 0.3],
            height: 0.0,
        })
        .chain(std::iter::once(Region {
            name: "tray".into(),
            frame: "tray".into(),
            x: [-0.15, 0.15],
            y: [-0.1, 0.1],
            height: 0.0,
        }))
        .collect();
    let handles = names
        .iter()
        .map(|n| (ObjectId::new(*n), cuboid_handles(CUBOID[2])))
        .collect();
    let mut start_q = vec![0.0, 0.0, 0.0];
    start_q.extend(KMR_ARM_TUCK);
    let mut goal_q = vec![0.0, 2.5, 0.0];
    goal_q.extend(KMR_ARM_TUCK);
    let scene = Scene {
        format: SCENE_FORMAT.into(),
        task: Task::Waiter,
        robot: "kmr".into(),
        base_pose: Pose::identity(),
        furniture,
        regions,
        handles,
        start_q,
        goal_q,
        goal_base_frame: Some("table_b".into()),
    };
    (scene, rec.finish())
}

/// Scene and demonstration of `task` for `robot` (the waiter always uses
/// `kmr`). Deterministic.
pub fn build_scene(task: Task, robot: &str) -> (Scene, Demonstration) {
    match task {
        Task::Shelf1 | Task::Shelf2 | Task::Shelf3 => shelf_task(task, robot),
        Task::Tunnel => tunnel_task(robot),
        Task::Waiter => waiter_task(),
    }
}

/// Frames that environment variation moves, with the shelf, tunnel or
/// destination table riding on them.
pub fn environment_frame(task: Task) -> &'static str {
    match task {
        Task::Shelf1 | Task::Shelf2 | Task::Shelf3 => "shelf",
        Task::Tunnel => "tunnel",
        Task::Waiter => "table_b",
    }
}

pub fn default_robot(task: Task) -> &'static str {
    match task {
        Task::Waiter => "kmr",
        _ => "panda7",
    }
}
