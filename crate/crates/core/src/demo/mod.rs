//! Demonstration data: contact events with per-object poses, plus the
//! generalization transforms (pose variation, object swap, re-anchoring).
//!
//! A demonstration is the output contract of an upstream perception stack.
//! Object poses are stored relative to named anchor frames; anchor frames are
//! either fixed in the world or attached to the robot base (a tray).

mod file;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cspace::{Mount, ObjectPlacement};
use crate::geom::{Geometry, Pose, Shape};
use crate::robot::Frame;

pub use file::{load_demonstration, save_demonstration, DEMO_FORMAT};

/// Name of the implicit world anchor frame; never stored in
/// [`Demonstration::frames`].
pub const WORLD_FRAME: &str = "world";

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectId(pub String);

impl ObjectId {
    pub fn new(s: impl Into<String>) -> Self {
        Self(s.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ObjectId {
    fn from(s: &str) -> Self {
        Self(s.to_string())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Contact {
    Grasp,
    Release,
    None,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnchoredPose {
    pub frame: String,
    /// Pose relative to `frame`.
    pub pose: Pose,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContactEvent {
    /// 1-based event index.
    pub k: usize,
    pub contacts: BTreeMap<ObjectId, Contact>,
    pub poses: BTreeMap<ObjectId, AnchoredPose>,
}

impl ContactEvent {
    /// The single object whose contact changes at this event, if any.
    pub fn active(&self) -> Option<(&ObjectId, Contact)> {
        self.contacts
            .iter()
            .find(|(_, c)| **c != Contact::None)
            .map(|(o, c)| (o, *c))
    }
}

/// Catalogue entry: a named shape.
#[derive(Clone, Debug, PartialEq)]
pub struct ShapeRef {
    pub name: String,
    pub geometry: Geometry,
}

impl ShapeRef {
    pub fn shape(&self) -> Shape {
        Shape {
            geometry: self.geometry,
            local: Pose::identity(),
        }
    }

    pub fn new_box(name: &str, size: [f64; 3]) -> Self {
        Self {
            name: name.to_string(),
            geometry: Geometry::Box {
                half_extents: nalgebra::Vector3::new(size[0], size[1], size[2]) * 0.5,
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attachment {
    RobotBase,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnchorFrame {
    /// World pose, or pose relative to the robot base when attached.
    pub pose: Pose,
    pub attached_to: Option<Attachment>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Demonstration {
    pub objects: BTreeMap<ObjectId, ShapeRef>,
    pub frames: BTreeMap<String, AnchorFrame>,
    pub events: Vec<ContactEvent>,
}

/// One grasp-release pair: `object` is picked at event `grasp` and put down
/// at event `release` (0-based event positions).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Move {
    pub object: ObjectId,
    pub grasp: usize,
    pub release: usize,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DemoError {
    #[error("malformed demonstration: {0}")]
    Json(String),
    #[error("T ≥ 1 required: the demonstration has no events")]
    Empty,
    #[error("schema violation{}: {message}", at(.k))]
    Schema { k: Option<usize>, message: String },
    #[error("event {k}: alternation violation: `{first}` and `{second}` change contact in the same event")]
    Simultaneous {
        k: usize,
        first: ObjectId,
        second: ObjectId,
    },
    #[error("event {k}: alternation violation for `{object}`: {message}")]
    Alternation {
        k: usize,
        object: ObjectId,
        message: String,
    },
    #[error("unknown object `{0}`")]
    UnknownObject(ObjectId),
    #[error("unknown frame `{0}`")]
    UnknownFrame(String),
    #[error("rotation delta {0} outside [-π, π]")]
    AngleOutOfRange(f64),
}

fn at(k: &Option<usize>) -> String {
    match k {
        Some(k) => format!(" at event {k}"),
        None => String::new(),
    }
}

impl Demonstration {
    /// Checks every structural invariant; loaders call this before returning.
    pub fn validate(&self) -> Result<(), DemoError> {
        if self.events.is_empty() {
            return Err(DemoError::Empty);
        }
        if self.objects.is_empty() {
            return Err(DemoError::Schema {
                k: None,
                message: "no objects declared".into(),
            });
        }
        for (id, s) in &self.objects {
            s.shape().validate().map_err(|e| DemoError::Schema {
                k: None,
                message: format!("object `{id}`: {e}"),
            })?;
        }
        // Held object, if any, and the per-object last contact.
        let mut held: Option<ObjectId> = None;
        let mut last: BTreeMap<&ObjectId, Contact> = BTreeMap::new();
        for (pos, ev) in self.events.iter().enumerate() {
            let k = ev.k;
            if k != pos + 1 {
                return Err(DemoError::Schema {
                    k: Some(k),
                    message: format!("event indices must run 1..T in order, expected {}", pos + 1),
                });
            }
            for id in ev.contacts.keys().chain(ev.poses.keys()) {
                if !self.objects.contains_key(id) {
                    return Err(DemoError::Schema {
                        k: Some(k),
                        message: format!("undeclared object `{id}`"),
                    });
                }
            }
            for id in self.objects.keys() {
                let Some(p) = ev.poses.get(id) else {
                    return Err(DemoError::Schema {
                        k: Some(k),
                        message: format!("missing pose for object `{id}`"),
                    });
                };
                if p.frame != WORLD_FRAME && !self.frames.contains_key(&p.frame) {
                    return Err(DemoError::Schema {
                        k: Some(k),
                        message: format!("pose of `{id}` refers to unknown frame `{}`", p.frame),
                    });
                }
            }
            let mut active = ev.contacts.iter().filter(|(_, c)| **c != Contact::None);
            let first = active.next();
            if let Some((second, _)) = active.next() {
                return Err(DemoError::Simultaneous {
                    k,
                    first: first.unwrap().0.clone(),
                    second: second.clone(),
                });
            }
            if let Some((id, c)) = first {
                let prev = last.get(id).copied().unwrap_or(Contact::Release);
                match (c, prev) {
                    (Contact::Grasp, Contact::Grasp) => {
                        return Err(DemoError::Alternation {
                            k,
                            object: id.clone(),
                            message: "grasped twice without a release".into(),
                        })
                    }
                    (Contact::Release, Contact::Release) => {
                        return Err(DemoError::Alternation {
                            k,
                            object: id.clone(),
                            message: "released without being grasped".into(),
                        })
                    }
                    _ => {}
                }
                match (c, &held) {
                    (Contact::Grasp, Some(other)) => {
                        return Err(DemoError::Simultaneous {
                            k,
                            first: other.clone(),
                            second: id.clone(),
                        })
                    }
                    (Contact::Grasp, None) => held = Some(id.clone()),
                    (Contact::Release, _) => held = None,
                    (Contact::None, _) => unreachable!(),
                }
                last.insert(id, *c);
            }
        }
        if let Some(id) = held {
            return Err(DemoError::Alternation {
                k: self.events.len(),
                object: id,
                message: "grasp never released".into(),
            });
        }
        Ok(())
    }

    pub fn event_count(&self) -> usize {
        self.events.len()
    }

    pub fn release_count(&self) -> usize {
        self.moves().len()
    }

    /// Grasp/release pairs in demonstration order.
    pub fn moves(&self) -> Vec<Move> {
        let mut out = Vec::new();
        let mut open: Option<(ObjectId, usize)> = None;
        for (pos, ev) in self.events.iter().enumerate() {
            match ev.active() {
                Some((id, Contact::Grasp)) => open = Some((id.clone(), pos)),
                Some((id, Contact::Release)) => {
                    if let Some((obj, g)) = open.take() {
                        debug_assert_eq!(&obj, id);
                        out.push(Move {
                            object: obj,
                            grasp: g,
                            release: pos,
                        });
                    }
                }
                _ => {}
            }
        }
        out
    }

    /// Resolves an anchored pose into a placement (world-fixed or carried by
    /// the robot base).
    pub fn resolve(&self, anchored: &AnchoredPose) -> Result<ObjectPlacement, DemoError> {
        if anchored.frame == WORLD_FRAME {
            return Ok(ObjectPlacement::world(anchored.pose));
        }
        let frame = self
            .frames
            .get(&anchored.frame)
            .ok_or_else(|| DemoError::UnknownFrame(anchored.frame.clone()))?;
        let pose = frame.pose * anchored.pose;
        Ok(match frame.attached_to {
            None => ObjectPlacement::world(pose),
            Some(Attachment::RobotBase) => ObjectPlacement {
                pose,
                mount: Mount::Robot(Frame::Base),
            },
        })
    }

    /// Placement of `object` at event position `pos` (0-based).
    pub fn placement(&self, pos: usize, object: &ObjectId) -> Result<ObjectPlacement, DemoError> {
        let ev = self.events.get(pos).ok_or(DemoError::Schema {
            k: Some(pos + 1),
            message: "no such event".into(),
        })?;
        let p = ev
            .poses
            .get(object)
            .ok_or_else(|| DemoError::UnknownObject(object.clone()))?;
        self.resolve(p)
    }

    /// Event positions holding `object`'s start pose: every event up to and
    /// including its first grasp (all events if it never moves).
    fn start_span(&self, object: &ObjectId) -> std::ops::RangeInclusive<usize> {
        let first = self
            .events
            .iter()
            .position(|e| e.contacts.get(object) == Some(&Contact::Grasp));
        0..=first.unwrap_or(self.events.len() - 1)
    }

    /// Event positions holding `object`'s goal pose: its last release and
    /// everything after (all events if it never moves).
    fn goal_span(&self, object: &ObjectId) -> std::ops::RangeInclusive<usize> {
        let last = self
            .events
            .iter()
            .rposition(|e| e.contacts.get(object) == Some(&Contact::Release));
        last.unwrap_or(0)..=self.events.len() - 1
    }

    /// Shifts start or goal poses by `(dx, dy)` in the anchor frame's axes and
    /// rotates them by `dθ` about their own z axis.
    pub fn vary_poses(&self, variation: &PoseVariation) -> Result<Demonstration, DemoError> {
        let mut out = self.clone();
        for (id, d) in &variation.deltas {
            if !self.objects.contains_key(id) {
                return Err(DemoError::UnknownObject(id.clone()));
            }
            if !(-std::f64::consts::PI..=std::f64::consts::PI).contains(&d.dtheta) {
                return Err(DemoError::AngleOutOfRange(d.dtheta));
            }
            let span = match variation.target {
                VariationTarget::Start => self.start_span(id),
                VariationTarget::Goal => self.goal_span(id),
            };
            for pos in span {
                let p = out.events[pos].poses.get_mut(id).expect("validated demonstration");
                let mut pose = p.pose.rotated_about_local_z(d.dtheta);
                pose.translation.x += d.dx;
                pose.translation.y += d.dy;
                p.pose = pose;
            }
        }
        out.validate()?;
        Ok(out)
    }

    /// Replaces the catalogue shape of one object; poses are kept.
    pub fn swap_object(&self, object: &ObjectId, shape: ShapeRef) -> Result<Demonstration, DemoError> {
        let mut out = self.clone();
        let slot = out
            .objects
            .get_mut(object)
            .ok_or_else(|| DemoError::UnknownObject(object.clone()))?;
        *slot = shape;
        out.validate()?;
        Ok(out)
    }

    /// Moves an anchor frame; object poses stored relative to it follow.
    pub fn reanchor(&self, frame: &str, pose: Pose) -> Result<Demonstration, DemoError> {
        let mut out = self.clone();
        let slot = out
            .frames
            .get_mut(frame)
            .ok_or_else(|| DemoError::UnknownFrame(frame.to_string()))?;
        slot.pose = pose;
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariationTarget {
    Start,
    Goal,
}

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct PlanarDelta {
    pub dx: f64,
    pub dy: f64,
    pub dtheta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoseVariation {
    pub target: VariationTarget,
    pub deltas: BTreeMap<ObjectId, PlanarDelta>,
}
