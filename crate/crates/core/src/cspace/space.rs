use std::collections::BTreeMap;
use std::ops::ControlFlow;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::collision::{place_furniture, place_objects, visit_pairs};
use super::{
    build_state_graph, project, Body, CspaceError, Handle, Mount, ObjectId, PairKind, PoseConstraint,
    ProjectionFailure, ProjectionParams, StateGraph, StateId, StateManifold, Transition,
};
use crate::demo::Demonstration;
use crate::geom::{Pose, Shape};
use crate::robot::{JointVector, LinkPoses, RobotModel};

/// Robot joints, world poses of every object, and the state they live in.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub q: JointVector,
    pub objects: BTreeMap<ObjectId, Pose>,
    pub state: StateId,
}

/// Largest constraint violation of a configuration.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Residual {
    pub translation: f64,
    pub rotation: f64,
}

/// Everything needed to sample, project and collision-check configurations
/// of one planning problem.
#[derive(Clone, Debug)]
pub struct Space {
    pub robot: RobotModel,
    pub furniture: Vec<Body>,
    pub shapes: BTreeMap<ObjectId, Shape>,
    pub graph: StateGraph,
    pub projection: ProjectionParams,
}

impl Space {
    pub fn new(
        robot: RobotModel,
        furniture: Vec<Body>,
        demo: &Demonstration,
        handles: &BTreeMap<ObjectId, Vec<Handle>>,
    ) -> Result<Self, CspaceError> {
        let graph = build_state_graph(demo, handles)?;
        let shapes = demo.objects.iter().map(|(id, s)| (id.clone(), s.shape())).collect();
        Ok(Self {
            robot,
            furniture,
            shapes,
            graph,
            projection: ProjectionParams::default(),
        })
    }

    pub fn state(&self, id: StateId) -> &StateManifold {
        self.graph.state(id)
    }

    /// World poses of all objects implied by `state` at link poses `links`.
    pub fn object_poses(&self, state: &StateManifold, links: &LinkPoses) -> BTreeMap<ObjectId, Pose> {
        let mut out: BTreeMap<ObjectId, Pose> = state
            .fixed
            .iter()
            .map(|(id, p)| (id.clone(), p.world_pose(links)))
            .collect();
        if let Some(h) = &state.grasped {
            out.insert(h.object.clone(), links.gripper * h.grip.inverse());
        }
        out
    }

    pub fn configuration(&self, q: JointVector, state: StateId) -> Configuration {
        let links = self.robot.fk_unchecked(q.as_slice());
        let objects = self.object_poses(self.state(state), &links);
        Configuration { q, objects, state }
    }

    /// Deviation of the stored object poses from the ones the state implies.
    pub fn residual(&self, c: &Configuration) -> Residual {
        let links = self.robot.fk_unchecked(c.q.as_slice());
        let expected = self.object_poses(self.state(c.state), &links);
        let mut r = Residual::default();
        for (id, want) in &expected {
            let (t, a) = match c.objects.get(id) {
                Some(have) => have.error_to(want),
                None => (f64::INFINITY, f64::INFINITY),
            };
            r.translation = r.translation.max(t);
            r.rotation = r.rotation.max(a);
        }
        if c.objects.len() != expected.len() {
            r.translation = f64::INFINITY;
        }
        r
    }

    pub fn satisfies_state(&self, c: &Configuration) -> bool {
        let r = self.residual(c);
        r.translation < self.projection.tol_translation && r.rotation < self.projection.tol_rotation
    }

    /// Visits the signed distance of every active pair at joints `q` in
    /// `state`; see [`super::collision`] for the pair rules.
    pub fn visit_distances(
        &self,
        q: &JointVector,
        state: StateId,
        cutoff: f64,
        visit: &mut dyn FnMut(PairKind, f64) -> ControlFlow<()>,
    ) -> ControlFlow<()> {
        let links = self.robot.fk_unchecked(q.as_slice());
        let state = self.state(state);
        let poses = self.object_poses(state, &links);
        let mut spheres = Vec::with_capacity(self.robot.spheres.len());
        self.robot.world_spheres(&links, &mut spheres);
        let furniture = place_furniture(&self.furniture, &links);
        let objects = place_objects(&self.robot, &self.shapes, state, &poses);
        visit_pairs(&spheres, &furniture, &objects, cutoff, visit)
    }

    /// Joint limits plus non-negative clearance on every active pair.
    pub fn is_free_q(&self, q: &JointVector, state: StateId) -> bool {
        if !self.robot.within_limits(q) {
            return false;
        }
        self.visit_distances(q, state, 0.0, &mut |_, d| {
            if d < 0.0 {
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        })
        .is_continue()
    }

    pub fn is_free(&self, c: &Configuration) -> bool {
        self.is_free_q(&c.q, c.state)
    }

    /// Exact minimum signed distance over active pairs (∞ with no pairs).
    pub fn clearance(&self, q: &JointVector, state: StateId) -> f64 {
        let mut min = f64::INFINITY;
        let _ = self.visit_distances(q, state, f64::INFINITY, &mut |_, d| {
            min = min.min(d);
            ControlFlow::Continue(())
        });
        min
    }

    /// `Σ max(0, d_safe − d)²` over active pairs.
    pub fn collision_penalty(&self, q: &JointVector, state: StateId, d_safe: f64) -> f64 {
        let mut total = 0.0;
        let _ = self.visit_distances(q, state, d_safe, &mut |_, d| {
            if d < d_safe {
                total += (d_safe - d) * (d_safe - d);
            }
            ControlFlow::Continue(())
        });
        total
    }

    /// Joints drawn uniformly inside the limits.
    pub fn uniform_q<R: Rng + ?Sized>(&self, rng: &mut R) -> JointVector {
        JointVector::from_iterator(
            self.robot.dof(),
            self.robot.limits().iter().map(|[lo, hi]| rng.random_range(*lo..=*hi)),
        )
    }

    /// Uniform joints; the object poses follow from the state. Neither
    /// manifold kind constrains the robot, so projection is the identity.
    pub fn sample_configuration<R: Rng + ?Sized>(&self, state: StateId, rng: &mut R) -> Configuration {
        self.configuration(self.uniform_q(rng), state)
    }

    /// The constraint shared by both sides of a transition: the gripper sits
    /// at the placed object pose composed with the handle grip.
    pub fn transition_constraint(&self, t: &Transition) -> PoseConstraint {
        let placed = self.state(t.placement).fixed[&t.object];
        let grip = self.graph.handle(&t.object, t.handle).grip;
        PoseConstraint::gripper_at(placed.mount, placed.pose * grip)
    }

    fn transition_seed<R: Rng + ?Sized>(&self, c: &PoseConstraint, rng: &mut R) -> JointVector {
        let mut q = self.uniform_q(rng);
        if self.robot.is_mobile() && c.reference == Mount::World {
            // Start the base within arm's length of the target, facing it.
            let local = self.robot.mount.inverse() * c.target;
            let phi = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            let r = rng.random_range(0.4..0.9);
            q[0] = local.translation.x + r * phi.cos();
            q[1] = local.translation.y + r * phi.sin();
            q[2] = (phi + std::f64::consts::PI + rng.random_range(-0.5..0.5) + std::f64::consts::PI)
                .rem_euclid(2.0 * std::f64::consts::PI)
                - std::f64::consts::PI;
            self.robot.clamp_to_limits(&mut q);
        }
        q
    }

    /// Projects a random seed onto transition `t` and returns the two
    /// coincident configurations `(from, to)` in the direction of travel.
    pub fn sample_transition<R: Rng + ?Sized>(
        &self,
        t: &Transition,
        rng: &mut R,
    ) -> Result<(Configuration, Configuration), ProjectionFailure> {
        let c = self.transition_constraint(t);
        let seed = self.transition_seed(&c, rng);
        let (q, _) = project(&self.robot, &seed, &[c], &self.projection)?;
        let (from, to) = t.endpoints();
        Ok((self.configuration(q.clone(), from), self.configuration(q, to)))
    }

    /// Picks one of the transitions tied to event position `pos` uniformly
    /// (i.e. a uniformly random handle) and samples it.
    pub fn sample_on_transition<R: Rng + ?Sized>(
        &self,
        pos: usize,
        rng: &mut R,
    ) -> Result<Result<(Configuration, Configuration), ProjectionFailure>, CspaceError> {
        let candidates = self.graph.transitions_at_event(pos);
        if candidates.is_empty() {
            return Err(CspaceError::NoTransition(pos));
        }
        let t = candidates[rng.random_range(0..candidates.len())];
        Ok(self.sample_transition(t, rng))
    }

    pub fn interpolate_q(a: &JointVector, b: &JointVector, t: f64) -> JointVector {
        a + (b - a) * t
    }

    /// Straight joint-space interpolation inside one state; objects are
    /// re-derived, so the result satisfies the state exactly.
    pub fn interpolate(&self, a: &Configuration, b: &Configuration, t: f64) -> Result<Configuration, CspaceError> {
        if a.state != b.state {
            return Err(CspaceError::StateMismatch(a.state, b.state));
        }
        if t == 0.0 {
            return Ok(a.clone());
        }
        if t == 1.0 {
            return Ok(b.clone());
        }
        Ok(self.configuration(Self::interpolate_q(&a.q, &b.q, t), a.state))
    }

    /// Checks the straight segment `a → b` in `state` at spacing ≤ `resolution`
    /// (endpoints included).
    pub fn segment_is_free(&self, a: &JointVector, b: &JointVector, state: StateId, resolution: f64) -> bool {
        let dist = (b - a).norm();
        let n = (dist / resolution).ceil().max(1.0) as usize;
        (0..=n).all(|i| self.is_free_q(&Self::interpolate_q(a, b, i as f64 / n as f64), state))
    }
}

/// Linear interpolation between two configurations of the same state.
pub fn linear_interpolate(
    space: &Space,
    a: &Configuration,
    b: &Configuration,
    t: f64,
) -> Result<Configuration, CspaceError> {
    space.interpolate(a, b, t)
}
