//! Trajectory refinement: a planned path becomes a torque-driven trajectory
//! of a diagonal-inertia double integrator, optimized with iLQR.
//!
//! Running cost per step:
//! `w_x‖x − x̂‖² + w_u‖u‖² + w_c Σ max(0, d_safe − d)² + w_b Σ limit violation²`,
//! plus `w_d ‖log(F⁻¹ · FK(q))‖²` at keyframes. The state weight `w_x`
//! starts high so the solver first tracks the planned path, then halves
//! every few iterations.

mod ilqr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cspace::{Space, StateId};
use crate::geom::{pose_distance_sq, se3_log, Pose};
use crate::planner::Path;
use crate::robot::{JointVector, RobotModel};

pub use ilqr::{solve, OcpProblem, Solution, SolverSettings};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OcpWeights {
    pub w_d: f64,
    /// Initial state-tracking weight.
    pub w_x: f64,
    pub w_u: f64,
    pub w_c: f64,
    pub w_b: f64,
    pub d_safe: f64,
    /// Iterations between two relaxations of `w_x`.
    pub relax_every: usize,
    pub relax_factor: f64,
    /// Floor of `w_x` as a fraction of its initial value.
    pub relax_floor: f64,
}

impl Default for OcpWeights {
    fn default() -> Self {
        Self {
            w_d: 100.0,
            w_x: 10.0,
            w_u: 1e-3,
            w_c: 50.0,
            w_b: 100.0,
            d_safe: 0.01,
            relax_every: 10,
            relax_factor: 0.5,
            relax_floor: 1e-3,
        }
    }
}

impl OcpWeights {
    pub fn validate(&self) -> Result<(), OcpError> {
        let all = [self.w_d, self.w_x, self.w_u, self.w_c, self.w_b];
        if all.iter().any(|w| !(*w >= 0.0)) {
            return Err(OcpError::InvalidInput("weights must be ≥ 0".into()));
        }
        if !(self.d_safe > 0.0) {
            return Err(OcpError::InvalidInput("d_safe must be > 0".into()));
        }
        if !(self.relax_factor > 0.0 && self.relax_factor <= 1.0) || self.relax_every == 0 {
            return Err(OcpError::InvalidInput("relaxation schedule must shrink w_x".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OcpError {
    #[error("invalid refinement input: {0}")]
    InvalidInput(String),
    #[error("cost diverged (NaN) at iteration {iteration}; last iterate: {dump}")]
    Divergence { iteration: usize, dump: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OcpState {
    pub q: JointVector,
    pub v: JointVector,
}

impl OcpState {
    pub fn at_rest(q: JointVector) -> Self {
        let v = JointVector::zeros(q.len());
        Self { q, v }
    }

    pub fn stacked(&self) -> DVector<f64> {
        let n = self.q.len();
        let mut x = DVector::zeros(2 * n);
        x.rows_mut(0, n).copy_from(&self.q);
        x.rows_mut(n, n).copy_from(&self.v);
        x
    }

    pub fn from_stacked(x: &DVector<f64>) -> Self {
        let n = x.len() / 2;
        Self {
            q: x.rows(0, n).into_owned(),
            v: x.rows(n, n).into_owned(),
        }
    }
}

/// A time index where the gripper must reach `target`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Keyframe {
    pub index: usize,
    pub target: Pose,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub dt: f64,
    pub states: Vec<OcpState>,
    pub controls: Vec<JointVector>,
    pub keyframes: Vec<Keyframe>,
    /// States active at each time index (two at a transition).
    pub phases: Vec<Vec<StateId>>,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.controls.len()
    }

    /// Σ‖q_{t+1} − q_t‖.
    pub fn length(&self) -> f64 {
        self.states.windows(2).map(|w| (&w[1].q - &w[0].q).norm()).sum()
    }
}

/// Semi-implicit Euler step: `v' = v + dt·M⁻¹u`, `q' = q + dt·v'`.
pub fn dynamics_step(x: &OcpState, u: &JointVector, inertia: &[f64], dt: f64) -> OcpState {
    let mut v = x.v.clone();
    for i in 0..v.len() {
        v[i] += dt * u[i] / inertia[i];
    }
    let q = &x.q + &v * dt;
    OcpState { q, v }
}

/// Constant `(A, B)` of the stacked state `x = (q, v)`.
pub fn dynamics_matrices(inertia: &[f64], dt: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = inertia.len();
    let mut a = DMatrix::identity(2 * n, 2 * n);
    let mut b = DMatrix::zeros(2 * n, n);
    for i in 0..n {
        a[(i, n + i)] = dt;
        b[(i, i)] = dt * dt / inertia[i];
        b[(n + i, i)] = dt / inertia[i];
    }
    (a, b)
}

pub fn rollout(x0: &OcpState, controls: &[JointVector], inertia: &[f64], dt: f64) -> Vec<OcpState> {
    let mut out = Vec::with_capacity(controls.len() + 1);
    out.push(x0.clone());
    for u in controls {
        let next = dynamics_step(out.last().unwrap(), u, inertia, dt);
        out.push(next);
    }
    out
}

/// `Σ_j max(0, lo_j − q_j)² + max(0, q_j − hi_j)²`.
pub fn limit_violation(model: &RobotModel, q: &JointVector) -> f64 {
    model
        .limits()
        .iter()
        .zip(q.iter())
        .map(|([lo, hi], v)| (lo - v).max(0.0).powi(2) + (v - hi).max(0.0).powi(2))
        .sum()
}

/// Keyframe residual `log(F⁻¹ · FK(q))`.
pub fn keyframe_residual(model: &RobotModel, q: &JointVector, target: &Pose) -> DVector<f64> {
    let g = model.fk_unchecked(q.as_slice()).gripper;
    DVector::from_column_slice(se3_log(target, &g).to_vector().as_slice())
}

/// Collision penalty of `q` summed over the active states.
pub fn collision_cost(space: &Space, q: &JointVector, phases: &[StateId], d_safe: f64) -> f64 {
    phases.iter().map(|s| space.collision_penalty(q, *s, d_safe)).sum()
}

/// One step of the running cost, without the keyframe term.
pub fn running_cost(
    x: &OcpState,
    u: &JointVector,
    xhat: &OcpState,
    weights: &OcpWeights,
    model: &RobotModel,
    collision: Option<(&Space, &[StateId])>,
) -> f64 {
    let mut cost = weights.w_x * ((&x.q - &xhat.q).norm_squared() + (&x.v - &xhat.v).norm_squared())
        + weights.w_u * u.norm_squared();
    if weights.w_b > 0.0 {
        cost += weights.w_b * limit_violation(model, &x.q);
    }
    if weights.w_c > 0.0 {
        if let Some((space, phases)) = collision {
            cost += weights.w_c * collision_cost(space, &x.q, phases, weights.d_safe);
        }
    }
    cost
}

/// Path resampled onto the time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Discretized {
    pub q: Vec<JointVector>,
    pub phases: Vec<Vec<StateId>>,
    /// Time indices of state changes.
    pub transitions: Vec<usize>,
}

/// Resamples each same-state run at equal joint-space spacing of at most
/// `spacing`; the coincident waypoints of a state change share one index.
pub fn discretize(path: &Path, spacing: f64) -> Discretized {
    let w = &path.waypoints;
    let mut out = Discretized {
        q: Vec::new(),
        phases: Vec::new(),
        transitions: Vec::new(),
    };
    let mut lo = 0;
    while lo < w.len() {
        let state = w[lo].state;
        let mut hi = lo;
        while hi + 1 < w.len() && w[hi + 1].state == state {
            hi += 1;
        }
        let mut cum = vec![0.0];
        for i in lo..hi {
            let d = (&w[i + 1].q - &w[i].q).norm();
            cum.push(cum.last().unwrap() + d);
        }
        let total = *cum.last().unwrap();
        let n = (total / spacing).ceil().max(1.0) as usize;
        let first = if out.q.is_empty() {
            0
        } else {
            // Coincides with the previous run's last sample.
            out.transitions.push(out.q.len() - 1);
            out.phases.last_mut().unwrap().push(state);
            1
        };
        if total == 0.0 {
            if first == 0 {
                out.q.push(w[hi].q.clone());
                out.phases.push(vec![state]);
            }
            lo = hi + 1;
            continue;
        }
        let mut seg = 0;
        for s in first..=n {
            if s == n {
                out.q.push(w[hi].q.clone());
            } else {
                let target = total * s as f64 / n as f64;
                while seg + 2 < cum.len() && cum[seg + 1] < target {
                    seg += 1;
                }
                let len = cum[seg + 1] - cum[seg];
                let t = if len > 0.0 { ((target - cum[seg]) / len).clamp(0.0, 1.0) } else { 0.0 };
                out.q.push(Space::interpolate_q(&w[lo + seg].q, &w[lo + seg + 1].q, t));
            }
            out.phases.push(vec![state]);
        }
        lo = hi + 1;
    }
    out
}

/// Keyframes: every state change plus the final index, with the gripper
/// pose of the path at those instants.
pub fn extract_keyframes(model: &RobotModel, grid: &Discretized) -> Vec<Keyframe> {
    let last = grid.q.len() - 1;
    let mut idx = grid.transitions.clone();
    if idx.last() != Some(&last) {
        idx.push(last);
    }
    idx.into_iter()
        .map(|index| Keyframe {
            index,
            target: model.fk_unchecked(grid.q[index].as_slice()).gripper,
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefineSettings {
    pub dt: f64,
    /// Joint-space spacing of the resampled path (rad).
    pub spacing: f64,
    pub solver: SolverSettings,
}

impl Default for RefineSettings {
    fn default() -> Self {
        Self {
            dt: 0.05,
            spacing: 0.1,
            solver: SolverSettings::default(),
        }
    }
}

/// Reference states with backward-difference velocities; rolling out the
/// matching controls from rest reproduces them exactly.
pub fn reference_states(q: &[JointVector], dt: f64) -> Vec<OcpState> {
    let mut out: Vec<OcpState> = Vec::with_capacity(q.len());
    for (t, qt) in q.iter().enumerate() {
        let v = if t == 0 {
            JointVector::zeros(qt.len())
        } else {
            (qt - &q[t - 1]) / dt
        };
        out.push(OcpState { q: qt.clone(), v });
    }
    out
}

/// Controls whose rollout from `reference[0]` reproduces `reference`.
pub fn tracking_controls(reference: &[OcpState], inertia: &[f64], dt: f64) -> Vec<JointVector> {
    reference
        .windows(2)
        .map(|w| {
            let mut u = (&w[1].v - &w[0].v) / dt;
            for i in 0..u.len() {
                u[i] *= inertia[i];
            }
            u
        })
        .collect()
}

/// Refines a planned path. The first waypoint at rest is the fixed initial
/// state; the solver starts from controls that replay the path.
pub fn refine(path: &Path, space: &Space, weights: &OcpWeights, settings: &RefineSettings) -> Result<Solution, OcpError> {
    weights.validate()?;
    if path.waypoints.is_empty() {
        return Err(OcpError::InvalidInput("empty path".into()));
    }
    if !(settings.dt > 0.0 && settings.spacing > 0.0) {
        return Err(OcpError::InvalidInput("dt and spacing must be > 0".into()));
    }
    let model = &space.robot;
    let grid = discretize(path, settings.spacing);
    let keyframes = extract_keyframes(model, &grid);
    let reference = reference_states(&grid.q, settings.dt);
    let controls = tracking_controls(&reference, &model.inertia, settings.dt);
    let problem = OcpProblem {
        model,
        space: Some(space),
        dt: settings.dt,
        x0: OcpState::at_rest(grid.q[0].clone()),
        reference,
        phases: grid.phases,
        keyframes,
        weights: *weights,
    };
    solve(&problem, controls, &settings.solver)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub rollout_error: f64,
    pub min_clearance: f64,
    pub keyframe_errors: Vec<f64>,
    pub max_abs_u: f64,
    pub max_abs_v: f64,
    pub within_limits: bool,
}

impl VerifyReport {
    pub fn is_collision_free(&self) -> bool {
        self.min_clearance >= 0.0
    }
}

/// Re-simulates the controls and measures clearance, keyframe errors and
/// magnitudes.
pub fn verify_trajectory(traj: &Trajectory, space: &Space) -> VerifyReport {
    let model = &space.robot;
    let rolled = rollout(&traj.states[0], &traj.controls, &model.inertia, traj.dt);
    let rollout_error = rolled
        .iter()
        .zip(&traj.states)
        .map(|(a, b)| ((&a.q - &b.q).amax()).max((&a.v - &b.v).amax()))
        .fold(0.0, f64::max);
    let rollout_error = if rolled.len() == traj.states.len() {
        rollout_error
    } else {
        f64::INFINITY
    };
    let mut min_clearance = f64::INFINITY;
    let mut within_limits = true;
    for (x, phases) in traj.states.iter().zip(&traj.phases) {
        within_limits &= model.within_limits(&x.q);
        for s in phases {
            min_clearance = min_clearance.min(space.clearance(&x.q, *s));
        }
    }
    let keyframe_errors = traj
        .keyframes
        .iter()
        .map(|k| pose_distance_sq(&k.target, &model.fk_unchecked(traj.states[k.index].q.as_slice()).gripper))
        .collect();
    VerifyReport {
        rollout_error,
        min_clearance,
        keyframe_errors,
        max_abs_u: traj.controls.iter().map(|u| u.amax()).fold(0.0, f64::max),
        max_abs_v: traj.states.iter().map(|x| x.v.amax()).fold(0.0, f64::max),
        within_limits,
    }
}
