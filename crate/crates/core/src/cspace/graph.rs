use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{CspaceError, Handle, Mount, ObjectId, ObjectPlacement, StateId, StateKind, StateManifold};
use crate::demo::Demonstration;
use crate::robot::Frame;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// placement → grasp
    Grasp,
    /// grasp → placement
    Release,
}

/// A neighbouring (placement, grasp) pair. The robot is constrained by the
/// placement's pose of the held object composed with the handle grip.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub placement: StateId,
    pub grasp: StateId,
    pub direction: Direction,
    pub object: ObjectId,
    pub handle: usize,
}

impl Transition {
    /// `(from, to)` in the direction of travel.
    pub fn endpoints(&self) -> (StateId, StateId) {
        match self.direction {
            Direction::Grasp => (self.placement, self.grasp),
            Direction::Release => (self.grasp, self.placement),
        }
    }
}

/// One demonstrated move: `object` is picked in `placements[j]` and put down
/// in `placements[j + 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub object: ObjectId,
    pub grasp_event: usize,
    pub release_event: usize,
}

#[derive(Clone, Debug)]
pub struct StateGraph {
    pub states: Vec<StateManifold>,
    /// 𝒫_1..𝒫_M in demonstration order.
    pub placements: Vec<StateId>,
    /// `grasps[j][h]`: grasp state between `placements[j]` and
    /// `placements[j + 1]` using handle `h` of the moved object.
    pub grasps: Vec<Vec<StateId>>,
    pub steps: Vec<Step>,
    pub transitions: Vec<Transition>,
    pub handles: BTreeMap<ObjectId, Vec<Handle>>,
    interned: HashMap<Vec<u64>, StateId>,
}

fn placement_key(key: &mut Vec<u64>, id: &ObjectId, p: &ObjectPlacement) {
    key.extend(id.0.bytes().map(u64::from));
    key.push(u64::MAX);
    key.extend(p.pose.translation.iter().map(|v| v.to_bits()));
    key.extend(p.pose.wxyz().iter().map(|v| v.to_bits()));
    key.push(match p.mount {
        Mount::World => 0,
        Mount::Robot(Frame::Base) => 1,
        Mount::Robot(Frame::Gripper) => 2,
        Mount::Robot(Frame::Link(i)) => 3 + i as u64,
    });
}

/// Exact identity key of a manifold; equal keys mean bitwise-equal states.
fn state_key(s: &StateManifold, handles: &BTreeMap<ObjectId, Vec<Handle>>) -> Vec<u64> {
    let mut key = Vec::with_capacity(16 * s.fixed.len() + 4);
    key.push(match s.kind {
        StateKind::Placement => 0,
        StateKind::Grasp => 1,
    });
    for (id, p) in &s.fixed {
        placement_key(&mut key, id, p);
    }
    if let Some(h) = &s.grasped {
        key.extend(h.object.0.bytes().map(u64::from));
        let idx = handles
            .get(&h.object)
            .and_then(|hs| hs.iter().position(|x| x == h))
            .unwrap_or(usize::MAX);
        key.push(idx as u64);
    }
    key
}

/// Builds the placement/grasp graph of a demonstration. Between consecutive
/// placements there is one grasp state per handle of the moved object.
pub fn build_state_graph(
    demo: &Demonstration,
    handles: &BTreeMap<ObjectId, Vec<Handle>>,
) -> Result<StateGraph, CspaceError> {
    demo.validate()?;
    for (id, hs) in handles {
        if !demo.objects.contains_key(id) {
            return Err(CspaceError::UnknownObject(id.clone()));
        }
        if let Some(h) = hs.iter().find(|h| &h.object != id) {
            return Err(CspaceError::UnknownObject(h.object.clone()));
        }
    }
    let mut graph = StateGraph {
        states: Vec::new(),
        placements: Vec::new(),
        grasps: Vec::new(),
        steps: Vec::new(),
        transitions: Vec::new(),
        handles: handles.clone(),
        interned: HashMap::new(),
    };

    let mut current = BTreeMap::new();
    for id in demo.objects.keys() {
        current.insert(id.clone(), demo.placement(0, id)?);
    }
    let first = graph.push(StateManifold::placement(current.clone()));
    graph.placements.push(first);

    for mv in demo.moves() {
        let object_handles = handles
            .get(&mv.object)
            .filter(|hs| !hs.is_empty())
            .ok_or_else(|| CspaceError::MissingHandles(mv.object.clone()))?;
        let from = *graph.placements.last().unwrap();
        current.insert(mv.object.clone(), demo.placement(mv.release, &mv.object)?);
        let to = graph.push(StateManifold::placement(current.clone()));
        let mut row = Vec::with_capacity(object_handles.len());
        for (h, handle) in object_handles.iter().enumerate() {
            let g = graph.push(StateManifold::grasp_from(&graph.states[from.0], handle.clone()));
            row.push(g);
            graph.transitions.push(Transition {
                placement: from,
                grasp: g,
                direction: Direction::Grasp,
                object: mv.object.clone(),
                handle: h,
            });
            graph.transitions.push(Transition {
                placement: to,
                grasp: g,
                direction: Direction::Release,
                object: mv.object.clone(),
                handle: h,
            });
        }
        graph.placements.push(to);
        graph.grasps.push(row);
        graph.steps.push(Step {
            object: mv.object,
            grasp_event: mv.grasp,
            release_event: mv.release,
        });
    }
    Ok(graph)
}

impl StateGraph {
    fn push(&mut self, s: StateManifold) -> StateId {
        let id = StateId(self.states.len());
        let key = state_key(&s, &self.handles);
        self.interned.entry(key).or_insert(id);
        self.states.push(s);
        id
    }

    /// Returns the id of an equal state, adding it if new.
    pub fn intern(&mut self, s: StateManifold) -> StateId {
        let key = state_key(&s, &self.handles);
        if let Some(id) = self.interned.get(&key) {
            return *id;
        }
        let id = StateId(self.states.len());
        self.interned.insert(key, id);
        self.states.push(s);
        id
    }

    pub fn state(&self, id: StateId) -> &StateManifold {
        &self.states[id.0]
    }

    pub fn get(&self, id: StateId) -> Option<&StateManifold> {
        self.states.get(id.0)
    }

    pub fn start_state(&self) -> StateId {
        self.placements[0]
    }

    pub fn goal_state(&self) -> StateId {
        *self.placements.last().unwrap()
    }

    pub fn placement_count(&self) -> usize {
        self.placements.len()
    }

    pub fn grasp_count(&self) -> usize {
        self.grasps.iter().map(Vec::len).sum()
    }

    /// Transitions tied to the contact change at event position `pos`.
    pub fn transitions_at_event(&self, pos: usize) -> Vec<&Transition> {
        let mut out = Vec::new();
        for (j, step) in self.steps.iter().enumerate() {
            let (dir, placement) = if step.grasp_event == pos {
                (Direction::Grasp, self.placements[j])
            } else if step.release_event == pos {
                (Direction::Release, self.placements[j + 1])
            } else {
                continue;
            };
            out.extend(
                self.transitions
                    .iter()
                    .filter(|t| t.direction == dir && t.placement == placement && self.grasps[j].contains(&t.grasp)),
            );
        }
        out
    }

    /// Event positions carrying a contact change, in order.
    pub fn contact_events(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .steps
            .iter()
            .flat_map(|s| [s.grasp_event, s.release_event])
            .collect();
        out.sort_unstable();
        out
    }

    pub fn handle(&self, object: &ObjectId, index: usize) -> &Handle {
        &self.handles[object][index]
    }
}
