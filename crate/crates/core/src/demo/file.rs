//! `*.demo.json` reading and writing.
//!
//! ```json
//! {
//!   "format": "demotamp-demo/1",
//!   "units": {"length": "m", "angle": "rad", "quaternion": "wxyz"},
//!   "objects": [{"id": "a", "shape": {"name": "cracker", "kind": "box", "size_m": [0.06, 0.16, 0.21]}}],
//!   "frames": [{"id": "table", "pose": {"translation_m": [..], "rotation_wxyz": [..]}, "attached_to": null}],
//!   "events": [{"k": 1, "contacts": {"a": "grasp"},
//!               "poses": {"a": {"frame": "table", "translation_m": [..], "rotation_wxyz": [..]}}}]
//! }
//! ```
//!
//! Floats are written in shortest round-trip form, so `load(save(d)) == d`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{
    AnchorFrame, AnchoredPose, Attachment, Contact, ContactEvent, DemoError, Demonstration, ObjectId,
    ShapeRef, WORLD_FRAME,
};
use crate::geom::{Geometry, Pose, Shape};

pub const DEMO_FORMAT: &str = "demotamp-demo/1";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Units {
    length: String,
    angle: String,
    quaternion: String,
}

impl Default for Units {
    fn default() -> Self {
        Self {
            length: "m".into(),
            angle: "rad".into(),
            quaternion: "wxyz".into(),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ShapeEntry {
    name: String,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    size_m: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    radius_m: Option<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObjectEntry {
    id: String,
    shape: ShapeEntry,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoseEntry {
    translation_m: [f64; 3],
    rotation_wxyz: [f64; 4],
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameEntry {
    id: String,
    pose: PoseEntry,
    #[serde(default)]
    attached_to: Option<Attachment>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnchoredEntry {
    frame: String,
    translation_m: [f64; 3],
    rotation_wxyz: [f64; 4],
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EventEntry {
    k: usize,
    #[serde(default)]
    contacts: BTreeMap<String, Contact>,
    poses: BTreeMap<String, AnchoredEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DemoFile {
    #[serde(default)]
    format: Option<String>,
    #[serde(default)]
    units: Option<Units>,
    objects: Vec<ObjectEntry>,
    #[serde(default)]
    frames: Vec<FrameEntry>,
    events: Vec<EventEntry>,
}

fn pose_entry(p: &Pose) -> PoseEntry {
    PoseEntry {
        translation_m: [p.translation.x, p.translation.y, p.translation.z],
        rotation_wxyz: p.wxyz(),
    }
}

fn schema(k: Option<usize>, message: impl Into<String>) -> DemoError {
    DemoError::Schema {
        k,
        message: message.into(),
    }
}

fn shape_from_entry(e: &ShapeEntry) -> Result<ShapeRef, DemoError> {
    let kind = Shape::kind_from_tag(&e.kind).map_err(|err| schema(None, err.to_string()))?;
    let geometry = match (kind, e.size_m, e.radius_m) {
        ("box", Some(size), None) => Geometry::Box {
            half_extents: nalgebra::Vector3::new(size[0], size[1], size[2]) * 0.5,
        },
        ("sphere", None, Some(radius)) => Geometry::Sphere { radius },
        _ => {
            return Err(schema(
                None,
                format!("shape `{}`: a box needs `size_m`, a sphere needs `radius_m`", e.name),
            ))
        }
    };
    Ok(ShapeRef {
        name: e.name.clone(),
        geometry,
    })
}

fn shape_entry(s: &ShapeRef) -> ShapeEntry {
    match s.geometry {
        Geometry::Box { half_extents } => ShapeEntry {
            name: s.name.clone(),
            kind: "box".into(),
            size_m: Some([half_extents.x * 2.0, half_extents.y * 2.0, half_extents.z * 2.0]),
            radius_m: None,
        },
        Geometry::Sphere { radius } => ShapeEntry {
            name: s.name.clone(),
            kind: "sphere".into(),
            size_m: None,
            radius_m: Some(radius),
        },
    }
}

pub fn load_demonstration(bytes: &[u8]) -> Result<Demonstration, DemoError> {
    let file: DemoFile = serde_json::from_slice(bytes).map_err(|e| DemoError::Json(e.to_string()))?;
    if let Some(f) = &file.format {
        if f != DEMO_FORMAT {
            return Err(schema(None, format!("unknown format `{f}`, expected `{DEMO_FORMAT}`")));
        }
    }
    if let Some(u) = &file.units {
        if u.length != "m" || u.angle != "rad" || u.quaternion != "wxyz" {
            return Err(schema(None, "units must be m / rad / wxyz"));
        }
    }
    let mut objects = BTreeMap::new();
    for o in &file.objects {
        if objects.insert(ObjectId(o.id.clone()), shape_from_entry(&o.shape)?).is_some() {
            return Err(schema(None, format!("duplicate object id `{}`", o.id)));
        }
    }
    let mut frames = BTreeMap::new();
    for f in &file.frames {
        let pose = Pose::from_wxyz(f.pose.translation_m, f.pose.rotation_wxyz)
            .map_err(|e| schema(None, format!("frame `{}`: {e}", f.id)))?;
        let frame = AnchorFrame {
            pose,
            attached_to: f.attached_to,
        };
        if f.id == WORLD_FRAME {
            if frame.pose != Pose::identity() || frame.attached_to.is_some() {
                return Err(schema(None, "frame `world` is reserved for the identity"));
            }
            continue;
        }
        if frames.insert(f.id.clone(), frame).is_some() {
            return Err(schema(None, format!("duplicate frame id `{}`", f.id)));
        }
    }
    let mut events = Vec::with_capacity(file.events.len());
    for e in &file.events {
        let mut contacts: BTreeMap<ObjectId, Contact> =
            objects.keys().map(|id: &ObjectId| (id.clone(), Contact::None)).collect();
        for (id, c) in &e.contacts {
            let id = ObjectId(id.clone());
            if !objects.contains_key(&id) {
                return Err(schema(Some(e.k), format!("undeclared object `{id}`")));
            }
            contacts.insert(id, *c);
        }
        let mut poses = BTreeMap::new();
        for (id, p) in &e.poses {
            let pose = Pose::from_wxyz(p.translation_m, p.rotation_wxyz)
                .map_err(|err| schema(Some(e.k), format!("pose of `{id}`: {err}")))?;
            poses.insert(
                ObjectId(id.clone()),
                AnchoredPose {
                    frame: p.frame.clone(),
                    pose,
                },
            );
        }
        events.push(ContactEvent {
            k: e.k,
            contacts,
            poses,
        });
    }
    let demo = Demonstration {
        objects,
        frames,
        events,
    };
    demo.validate()?;
    Ok(demo)
}

/// Canonical pretty-printed JSON.
pub fn save_demonstration(demo: &Demonstration) -> String {
    let file = DemoFile {
        format: Some(DEMO_FORMAT.to_string()),
        units: Some(Units::default()),
        objects: demo
            .objects
            .iter()
            .map(|(id, s)| ObjectEntry {
                id: id.0.clone(),
                shape: shape_entry(s),
            })
            .collect(),
        frames: demo
            .frames
            .iter()
            .filter(|(id, _)| id.as_str() != WORLD_FRAME)
            .map(|(id, f)| FrameEntry {
                id: id.clone(),
                pose: pose_entry(&f.pose),
                attached_to: f.attached_to,
            })
            .collect(),
        events: demo
            .events
            .iter()
            .map(|e| EventEntry {
                k: e.k,
                contacts: e.contacts.iter().map(|(id, c)| (id.0.clone(), *c)).collect(),
                poses: e
                    .poses
                    .iter()
                    .map(|(id, p)| {
                        let pe = pose_entry(&p.pose);
                        (
                            id.0.clone(),
                            AnchoredEntry {
                                frame: p.frame.clone(),
                                translation_m: pe.translation_m,
                                rotation_wxyz: pe.rotation_wxyz,
                            },
                        )
                    })
                    .collect(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&file).expect("demonstration serializes")
}
