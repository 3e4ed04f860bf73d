//! Damped-least-squares Newton projection onto pose constraints.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::Mount;
use crate::geom::Pose;
use crate::robot::{world_pose_error, Frame, JointVector, LinkPoses, RobotModel};

/// `world(frame) = world(reference) ∘ target`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoseConstraint {
    pub frame: Frame,
    pub reference: Mount,
    pub target: Pose,
}

impl PoseConstraint {
    pub fn gripper_at(reference: Mount, target: Pose) -> Self {
        Self {
            frame: Frame::Gripper,
            reference,
            target,
        }
    }

    pub fn world_target(&self, links: &LinkPoses) -> Pose {
        match self.reference {
            Mount::World => self.target,
            Mount::Robot(f) => links.frame(f).expect("reference frame exists") * self.target,
        }
    }

    /// (translation error m, rotation error rad).
    pub fn error(&self, links: &LinkPoses) -> (f64, f64) {
        let current = links.frame(self.frame).expect("constrained frame exists");
        current.error_to(&self.world_target(links))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionParams {
    pub tol_translation: f64,
    pub tol_rotation: f64,
    pub max_iterations: usize,
    /// Initial Levenberg damping; ×10 whenever a step fails to reduce the
    /// residual, ÷10 after an accepted step.
    pub damping: f64,
}

impl Default for ProjectionParams {
    fn default() -> Self {
        Self {
            tol_translation: 1e-4,
            tol_rotation: 1e-3,
            max_iterations: 100,
            damping: 1e-6,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProjectionFailure {
    pub iterations: usize,
    pub translation: f64,
    pub rotation: f64,
}

struct Eval {
    error: DVector<f64>,
    cost: f64,
    satisfied: bool,
    worst: (f64, f64),
}

fn evaluate(model: &RobotModel, q: &JointVector, constraints: &[PoseConstraint], p: &ProjectionParams) -> (Eval, LinkPoses) {
    let links = model.fk_unchecked(q.as_slice());
    let mut error = DVector::zeros(6 * constraints.len());
    let mut satisfied = true;
    let mut worst: (f64, f64) = (0.0, 0.0);
    for (i, c) in constraints.iter().enumerate() {
        let current = links.frame(c.frame).expect("constrained frame exists");
        let target = c.world_target(&links);
        error
            .fixed_rows_mut::<6>(6 * i)
            .copy_from(&world_pose_error(&current, &target));
        let (t, r) = current.error_to(&target);
        worst = (worst.0.max(t), worst.1.max(r));
        satisfied &= t < p.tol_translation && r < p.tol_rotation;
    }
    let cost = error.norm_squared();
    (
        Eval {
            error,
            cost,
            satisfied,
            worst,
        },
        links,
    )
}

fn stacked_jacobian(
    model: &RobotModel,
    q: &JointVector,
    links: &LinkPoses,
    constraints: &[PoseConstraint],
) -> DMatrix<f64> {
    let n = model.dof();
    let mut jac = DMatrix::zeros(6 * constraints.len(), n);
    for (i, c) in constraints.iter().enumerate() {
        let point = links.frame(c.frame).unwrap().translation;
        let mut block = model.jacobian_from_poses(q.as_slice(), links, c.frame, &point);
        if let Mount::Robot(reference) = c.reference {
            let target = c.world_target(links).translation;
            block -= model.jacobian_from_poses(q.as_slice(), links, reference, &target);
        }
        jac.rows_mut(6 * i, 6).copy_from(&block);
    }
    jac
}

/// Moves `seed` onto the constraint set while staying inside joint limits.
/// Returns the projected joints and the number of Newton iterations; a seed
/// that already satisfies every constraint is returned untouched.
pub fn project(
    model: &RobotModel,
    seed: &JointVector,
    constraints: &[PoseConstraint],
    params: &ProjectionParams,
) -> Result<(JointVector, usize), ProjectionFailure> {
    let mut q = seed.clone();
    let (mut eval, mut links) = evaluate(model, &q, constraints, params);
    if eval.satisfied {
        return Ok((q, 0));
    }
    let n = model.dof();
    let mut lambda = params.damping;
    let mut jac = stacked_jacobian(model, &q, &links, constraints);
    for it in 1..=params.max_iterations {
        let jt = jac.transpose();
        let mut lhs = &jt * &jac;
        for d in 0..n {
            lhs[(d, d)] += lambda;
        }
        let rhs = &jt * &eval.error;
        let Some(step) = lhs.cholesky().map(|c| c.solve(&rhs)) else {
            lambda *= 10.0;
            continue;
        };
        let mut candidate = &q + step;
        model.clamp_to_limits(&mut candidate);
        let (next, next_links) = evaluate(model, &candidate, constraints, params);
        if next.satisfied {
            return Ok((candidate, it));
        }
        if next.cost < eval.cost && next.cost.is_finite() {
            q = candidate;
            eval = next;
            links = next_links;
            jac = stacked_jacobian(model, &q, &links, constraints);
            lambda = (lambda * 0.1).max(1e-12);
        } else {
            lambda *= 10.0;
        }
    }
    Err(ProjectionFailure {
        iterations: params.max_iterations,
        translation: eval.worst.0,
        rotation: eval.worst.1,
    })
}
