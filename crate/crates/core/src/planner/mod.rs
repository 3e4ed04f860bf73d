//! Demonstration-guided multi-tree RRT, path extraction, random shortcut and
//! the unguided baseline.
//!
//! Trees are rooted at the start, the goal, and at configurations sampled on
//! transitions. Each iteration either roots a new tree on a transition (with
//! probability η) or extends the nearest node of a random state by a step of
//! at most δ; every new node is then offered to the other trees in its state.

mod forest;
mod rrt;
mod shortcut;
mod unguided;

use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cspace::{Configuration, Space, StateGraph, StateKind};

pub use forest::{nearest_neighbor, Forest, Node, UnionFind};
pub use rrt::{attempt_link, TransitionSampler};
pub use shortcut::shortcut;
pub use unguided::{plan_unguided, SurfaceRegion, UnguidedSampler};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlannerParams {
    /// Probability of rooting a new tree on a transition per iteration.
    pub eta: f64,
    /// Largest joint-space distance between a node and its parent (rad).
    pub delta: f64,
    /// Wall-clock budget (s).
    pub max_time: f64,
    pub max_iterations: u64,
    pub seed: u64,
}

impl Default for PlannerParams {
    fn default() -> Self {
        Self {
            eta: 0.3,
            delta: 0.2,
            max_time: 60.0,
            max_iterations: u64::MAX,
            seed: 0,
        }
    }
}

impl PlannerParams {
    /// η = 0 is accepted: it disables transition sampling entirely.
    pub fn validate(&self) -> Result<(), PlanError> {
        if !(0.0..1.0).contains(&self.eta) {
            return Err(PlanError::InvalidParams(format!("eta {} must lie in [0, 1)", self.eta)));
        }
        if !(self.delta > 0.0) {
            return Err(PlanError::InvalidParams(format!("delta {} must be > 0", self.delta)));
        }
        if !(self.max_time > 0.0) {
            return Err(PlanError::InvalidParams(format!("time limit {} must be > 0", self.max_time)));
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("invalid planner parameters: {0}")]
    InvalidParams(String),
    #[error("invalid {which} configuration: {reason}")]
    InvalidQuery { which: &'static str, reason: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanStatus {
    Success,
    Timeout,
    IterationLimit,
}

impl PlanStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            PlanStatus::Success => "success",
            PlanStatus::Timeout => "timeout",
            PlanStatus::IterationLimit => "iteration_limit",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanReport {
    pub status: PlanStatus,
    pub time_s: f64,
    pub iterations: u64,
    pub trees: usize,
    pub nodes: usize,
    pub transition_samples: u64,
    pub transition_failures: u64,
    pub eta: f64,
    pub delta: f64,
    pub seed: u64,
}

impl PlanReport {
    fn new(params: &PlannerParams) -> Self {
        Self {
            status: PlanStatus::Timeout,
            time_s: 0.0,
            iterations: 0,
            trees: 0,
            nodes: 0,
            transition_samples: 0,
            transition_failures: 0,
            eta: params.eta,
            delta: params.delta,
            seed: params.seed,
        }
    }

    fn finish(&mut self, forest: &Forest, clock: Instant) {
        self.time_s = clock.elapsed().as_secs_f64();
        self.trees = forest.tree_count();
        self.nodes = forest.nodes.len();
    }
}

/// Waypoints from start to goal; a state change is a pair of consecutive
/// waypoints with equal joints and different states.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub waypoints: Vec<Configuration>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub time_s: f64,
    pub path_len_rad: f64,
    pub grasps: usize,
}

impl Path {
    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    /// Σ‖q_{i+1} − q_i‖ over robot joints.
    pub fn length(&self) -> f64 {
        self.waypoints
            .windows(2)
            .map(|w| (&w[1].q - &w[0].q).norm())
            .sum()
    }

    /// Indices `i` where waypoint `i` and `i + 1` are a state change.
    pub fn transition_indices(&self) -> Vec<usize> {
        (0..self.waypoints.len().saturating_sub(1))
            .filter(|&i| self.waypoints[i].state != self.waypoints[i + 1].state)
            .collect()
    }

    /// Placement → grasp changes along the path.
    pub fn grasp_count(&self, graph: &StateGraph) -> usize {
        self.transition_indices()
            .into_iter()
            .filter(|&i| {
                graph.state(self.waypoints[i].state).kind == StateKind::Placement
                    && graph.state(self.waypoints[i + 1].state).kind == StateKind::Grasp
            })
            .count()
    }

    /// States visited, one entry per maximal same-state run.
    pub fn state_sequence(&self) -> Vec<crate::cspace::StateId> {
        let mut out: Vec<crate::cspace::StateId> = Vec::new();
        for w in &self.waypoints {
            if out.last() != Some(&w.state) {
                out.push(w.state);
            }
        }
        out
    }

    /// Checks every path invariant: state changes happen at identical
    /// joints, same-state neighbours are within δ, each waypoint is in its
    /// state and free, and each same-state edge is free at δ/4.
    pub fn check(&self, space: &Space, delta: f64) -> Result<(), String> {
        if self.waypoints.is_empty() {
            return Err("empty path".into());
        }
        for (i, w) in self.waypoints.iter().enumerate() {
            if !space.satisfies_state(w) {
                return Err(format!("waypoint {i} violates its state constraints"));
            }
            if !space.is_free(w) {
                return Err(format!("waypoint {i} is in collision or outside limits"));
            }
        }
        for (i, pair) in self.waypoints.windows(2).enumerate() {
            let (a, b) = (&pair[0], &pair[1]);
            if a.state != b.state {
                if a.q != b.q {
                    return Err(format!("state change at {i} with different joints"));
                }
                continue;
            }
            let d = (&b.q - &a.q).norm();
            if d > delta + 1e-9 {
                return Err(format!("edge {i} has length {d} > δ = {delta}"));
            }
            if !space.segment_is_free(&a.q, &b.q, a.state, delta / 4.0) {
                return Err(format!("edge {i} collides"));
            }
        }
        Ok(())
    }
}

pub fn metrics(path: &Path, report: &PlanReport, graph: &StateGraph) -> Metrics {
    Metrics {
        time_s: report.time_s,
        path_len_rad: path.length(),
        grasps: path.grasp_count(graph),
    }
}

fn check_query(space: &Space, start: &Configuration, goal: &Configuration) -> Result<(), PlanError> {
    for (which, c, expected) in [
        ("start", start, space.graph.start_state()),
        ("goal", goal, space.graph.goal_state()),
    ] {
        let fail = |reason: String| Err(PlanError::InvalidQuery { which, reason });
        if c.q.len() != space.robot.dof() {
            return fail(format!("{} joints, robot has {}", c.q.len(), space.robot.dof()));
        }
        if c.state != expected {
            return fail(format!("state {} instead of {}", c.state, expected));
        }
        if !space.satisfies_state(c) {
            return fail("object poses do not match the state".into());
        }
        if !space.is_free(c) {
            return fail("in collision or outside joint limits".into());
        }
    }
    Ok(())
}

/// Transition roots taken from the demonstrated contact events.
pub struct GuidedSampler {
    events: Vec<usize>,
}

impl GuidedSampler {
    pub fn new(graph: &StateGraph) -> Self {
        Self {
            events: graph.contact_events(),
        }
    }
}

impl TransitionSampler for GuidedSampler {
    fn sample(&mut self, space: &mut Space, rng: &mut ChaCha8Rng) -> Option<(Configuration, Configuration)> {
        if self.events.is_empty() {
            return None;
        }
        let k = self.events[rng.random_range(0..self.events.len())];
        space.sample_on_transition(k, rng).ok()?.ok()
    }
}

/// Plans from `start` (first placement) to `goal` (last placement) through
/// the demonstrated state sequence.
pub fn plan(
    space: &Space,
    start: &Configuration,
    goal: &Configuration,
    params: &PlannerParams,
) -> Result<(Option<Path>, PlanReport), PlanError> {
    params.validate()?;
    check_query(space, start, goal)?;
    let mut sampler = GuidedSampler::new(&space.graph);
    let mut working = space.clone();
    let (path, report, _) = rrt::grow(&mut working, &mut sampler, start.clone(), goal.clone(), params);
    Ok((path, report))
}

/// Like [`plan`] but also returns the forest, for inspection in tests.
pub fn plan_with_forest(
    space: &Space,
    start: &Configuration,
    goal: &Configuration,
    params: &PlannerParams,
) -> Result<(Option<Path>, PlanReport, Forest), PlanError> {
    params.validate()?;
    check_query(space, start, goal)?;
    let mut sampler = GuidedSampler::new(&space.graph);
    let mut working = space.clone();
    Ok(rrt::grow(&mut working, &mut sampler, start.clone(), goal.clone(), params))
}
