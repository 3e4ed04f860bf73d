//! iLQR with Gauss–Newton cost expansions and a backtracking line search.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{
    dynamics_matrices, keyframe_residual, rollout, Keyframe, OcpError, OcpState, OcpWeights, Trajectory,
};
use crate::cspace::{Space, StateId};
use crate::robot::{JointVector, RobotModel};

pub struct OcpProblem<'a> {
    pub model: &'a RobotModel,
    /// Collision geometry; `None` drops the collision term.
    pub space: Option<&'a Space>,
    pub dt: f64,
    pub x0: OcpState,
    /// `x̂_0 … x̂_H`.
    pub reference: Vec<OcpState>,
    /// Active states per time index; empty lists skip collision checks.
    pub phases: Vec<Vec<StateId>>,
    pub keyframes: Vec<Keyframe>,
    pub weights: OcpWeights,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub max_iterations: usize,
    /// Apply the `w_x` relaxation schedule.
    pub relax: bool,
    /// Central finite-difference step for collision residuals (rad).
    pub fd_step: f64,
    /// Stop once an accepted step improves the cost by less than this
    /// fraction (after relaxation has finished).
    pub tolerance: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            max_iterations: 150,
            relax: true,
            fd_step: 1e-5,
            tolerance: 1e-7,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub trajectory: Trajectory,
    /// Total cost after every accepted step or relaxation, non-increasing.
    pub cost_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Set when the iteration cap was hit before convergence.
    pub warning: Option<String>,
    pub final_w_x: f64,
}

impl Solution {
    pub fn final_cost(&self) -> f64 {
        *self.cost_history.last().unwrap()
    }
}

struct Expansion {
    lx: DVector<f64>,
    lxx: DMatrix<f64>,
    lu: DVector<f64>,
    luu: DMatrix<f64>,
}

impl OcpProblem<'_> {
    fn horizon(&self) -> usize {
        self.reference.len() - 1
    }

    fn phases_at(&self, t: usize) -> &[StateId] {
        self.phases.get(t).map(Vec::as_slice).unwrap_or(&[])
    }

    fn keyframe_at(&self, t: usize) -> impl Iterator<Item = &Keyframe> {
        self.keyframes.iter().filter(move |k| k.index == t)
    }

    fn collision_distances(&self, q: &JointVector, phases: &[StateId], out: &mut Vec<f64>) {
        out.clear();
        if let Some(space) = self.space {
            for s in phases {
                let _ = space.visit_distances(q, *s, self.weights.d_safe, &mut |_, d| {
                    out.push(d);
                    std::ops::ControlFlow::Continue(())
                });
            }
        }
    }

    /// Cost of state `x` at time `t` (control excluded).
    fn state_cost(&self, t: usize, x: &OcpState, w_x: f64) -> f64 {
        let w = &self.weights;
        let xhat = &self.reference[t];
        let mut c = w_x * ((&x.q - &xhat.q).norm_squared() + (&x.v - &xhat.v).norm_squared());
        if w.w_b > 0.0 {
            c += w.w_b * super::limit_violation(self.model, &x.q);
        }
        if w.w_c > 0.0 {
            if let Some(space) = self.space {
                c += w.w_c * super::collision_cost(space, &x.q, self.phases_at(t), w.d_safe);
            }
        }
        for k in self.keyframe_at(t) {
            c += w.w_d * keyframe_residual(self.model, &x.q, &k.target).norm_squared();
        }
        c
    }

    fn total_cost(&self, states: &[OcpState], controls: &[JointVector], w_x: f64) -> f64 {
        let mut c = 0.0;
        for (t, x) in states.iter().enumerate() {
            c += self.state_cost(t, x, w_x);
        }
        for u in controls {
            c += self.weights.w_u * u.norm_squared();
        }
        c
    }

    /// Cost at time `t` including the control term when `u` is given.
    pub fn stage_cost(&self, t: usize, x: &OcpState, u: Option<&JointVector>, w_x: f64) -> f64 {
        self.state_cost(t, x, w_x) + u.map_or(0.0, |u| self.weights.w_u * u.norm_squared())
    }

    /// Gradient of [`Self::stage_cost`] with respect to the stacked state and
    /// the control, as used by the backward pass.
    pub fn stage_gradient(&self, t: usize, x: &OcpState, u: Option<&JointVector>, w_x: f64) -> (DVector<f64>, DVector<f64>) {
        let e = self.expand(t, x, u, w_x, 1e-5);
        (e.lx, e.lu)
    }

    fn expand(&self, t: usize, x: &OcpState, u: Option<&JointVector>, w_x: f64, fd: f64) -> Expansion {
        let n = self.model.dof();
        let w = &self.weights;
        let xhat = &self.reference[t];
        let mut lx = DVector::zeros(2 * n);
        lx.rows_mut(0, n).copy_from(&((&x.q - &xhat.q) * (2.0 * w_x)));
        lx.rows_mut(n, n).copy_from(&((&x.v - &xhat.v) * (2.0 * w_x)));
        let mut lxx = DMatrix::identity(2 * n, 2 * n) * (2.0 * w_x);

        if w.w_b > 0.0 {
            for (j, [lo, hi]) in self.model.limits().iter().enumerate() {
                let q = x.q[j];
                if q > *hi {
                    lx[j] += 2.0 * w.w_b * (q - hi);
                    lxx[(j, j)] += 2.0 * w.w_b;
                } else if q < *lo {
                    lx[j] -= 2.0 * w.w_b * (lo - q);
                    lxx[(j, j)] += 2.0 * w.w_b;
                }
            }
        }

        let phases = self.phases_at(t);
        if w.w_c > 0.0 && self.space.is_some() && !phases.is_empty() {
            let mut d0 = Vec::new();
            self.collision_distances(&x.q, phases, &mut d0);
            let near = d0.iter().any(|d| *d < w.d_safe + 1e-3);
            if near {
                let r0: Vec<f64> = d0.iter().map(|d| (w.d_safe - d).max(0.0)).collect();
                let mut jr = DMatrix::zeros(r0.len(), n);
                let (mut dp, mut dm) = (Vec::new(), Vec::new());
                for j in 0..n {
                    let mut qp = x.q.clone();
                    qp[j] += fd;
                    let mut qm = x.q.clone();
                    qm[j] -= fd;
                    self.collision_distances(&qp, phases, &mut dp);
                    self.collision_distances(&qm, phases, &mut dm);
                    for p in 0..r0.len() {
                        let rp = (w.d_safe - dp[p]).max(0.0);
                        let rm = (w.d_safe - dm[p]).max(0.0);
                        jr[(p, j)] = (rp - rm) / (2.0 * fd);
                    }
                }
                let r0 = DVector::from_vec(r0);
                let g = jr.transpose() * &r0 * (2.0 * w.w_c);
                let h = jr.transpose() * &jr * (2.0 * w.w_c);
                let mut top = lx.rows_mut(0, n);
                top += g;
                let mut block = lxx.view_mut((0, 0), (n, n));
                block += h;
            }
        }

        for k in self.keyframe_at(t) {
            let r0 = keyframe_residual(self.model, &x.q, &k.target);
            let h = 1e-6;
            let mut jk = DMatrix::zeros(6, n);
            for j in 0..n {
                let mut qp = x.q.clone();
                qp[j] += h;
                let mut qm = x.q.clone();
                qm[j] -= h;
                let col = (keyframe_residual(self.model, &qp, &k.target)
                    - keyframe_residual(self.model, &qm, &k.target))
                    / (2.0 * h);
                jk.set_column(j, &col);
            }
            let mut top = lx.rows_mut(0, n);
            top += jk.transpose() * &r0 * (2.0 * w.w_d);
            let mut block = lxx.view_mut((0, 0), (n, n));
            block += jk.transpose() * &jk * (2.0 * w.w_d);
        }

        let (lu, luu) = match u {
            Some(u) => (u * (2.0 * w.w_u), DMatrix::identity(n, n) * (2.0 * w.w_u)),
            None => (DVector::zeros(n), DMatrix::zeros(n, n)),
        };
        Expansion { lx, lxx, lu, luu }
    }
}

fn dump(controls: &[JointVector]) -> String {
    let rows: Vec<Vec<f64>> = controls.iter().map(|u| u.iter().copied().collect()).collect();
    serde_json::to_string(&rows).unwrap_or_default()
}

/// Minimizes the problem's cost over the controls, starting from `controls`.
pub fn solve(problem: &OcpProblem, controls: Vec<JointVector>, settings: &SolverSettings) -> Result<Solution, OcpError> {
    let model = problem.model;
    let n = model.dof();
    let h = problem.horizon();
    if controls.len() != h {
        return Err(OcpError::InvalidInput(format!(
            "{} controls for a horizon of {h}",
            controls.len()
        )));
    }
    if problem.x0.q.len() != n || controls.iter().any(|u| u.len() != n) {
        return Err(OcpError::InvalidInput("dimension mismatch".into()));
    }
    let w = &problem.weights;
    let (a, b) = dynamics_matrices(&model.inertia, problem.dt);
    let at = a.transpose();
    let bt = b.transpose();

    let mut u = controls;
    let mut xs = rollout(&problem.x0, &u, &model.inertia, problem.dt);
    let mut w_x = w.w_x;
    let floor = w.w_x * w.relax_floor;
    let mut cost = problem.total_cost(&xs, &u, w_x);
    if !cost.is_finite() {
        return Err(OcpError::Divergence {
            iteration: 0,
            dump: dump(&u),
        });
    }
    let mut history = vec![cost];
    let mut mu = 0.0;
    let mut converged = false;
    let mut iterations = 0;
    let relax_done = |w_x: f64| !settings.relax || w_x <= floor;

    while iterations < settings.max_iterations {
        iterations += 1;
        if settings.relax && iterations > 1 && (iterations - 1) % w.relax_every == 0 && w_x > floor {
            w_x = (w_x * w.relax_factor).max(floor);
            cost = problem.total_cost(&xs, &u, w_x);
            history.push(cost);
        }

        // Backward pass.
        let term = problem.expand(h, &xs[h], None, w_x, settings.fd_step);
        let mut vx = term.lx;
        let mut vxx = term.lxx;
        let mut gains: Vec<(DVector<f64>, DMatrix<f64>)> = Vec::with_capacity(h);
        let mut expected = 0.0;
        let mut ok = true;
        for t in (0..h).rev() {
            let e = problem.expand(t, &xs[t], Some(&u[t]), w_x, settings.fd_step);
            let qx = &e.lx + &at * &vx;
            let qu = &e.lu + &bt * &vx;
            let vxx_a = &vxx * &a;
            let qxx = &e.lxx + &at * &vxx_a;
            let mut quu = &e.luu + &bt * &vxx * &b;
            for i in 0..n {
                quu[(i, i)] += mu;
            }
            let qux = &bt * &vxx_a;
            let Some(chol) = quu.clone().cholesky() else {
                ok = false;
                break;
            };
            let k = -chol.solve(&qu);
            let kk = -chol.solve(&qux);
            expected += (qu.transpose() * &k)[0];
            vx = &qx + kk.transpose() * &quu * &k + kk.transpose() * &qu + qux.transpose() * &k;
            let m = &qxx + kk.transpose() * &quu * &kk + kk.transpose() * &qux + qux.transpose() * &kk;
            vxx = (&m + m.transpose()) * 0.5;
            gains.push((k, kk));
        }
        if !ok {
            mu = (mu * 10.0).max(1e-6);
            continue;
        }
        gains.reverse();

        // Forward pass with backtracking.
        let mut accepted = None;
        if expected < 0.0 || h == 0 {
            let mut alpha = 1.0;
            for _ in 0..12 {
                let mut x = problem.x0.clone();
                let mut new_x = Vec::with_capacity(h + 1);
                let mut new_u = Vec::with_capacity(h);
                new_x.push(x.clone());
                for t in 0..h {
                    let dx = x.stacked() - xs[t].stacked();
                    let ut = &u[t] + &gains[t].0 * alpha + &gains[t].1 * dx;
                    x = super::dynamics_step(&x, &ut, &model.inertia, problem.dt);
                    new_x.push(x.clone());
                    new_u.push(ut);
                }
                let c = problem.total_cost(&new_x, &new_u, w_x);
                if c.is_nan() {
                    return Err(OcpError::Divergence {
                        iteration: iterations,
                        dump: dump(&new_u),
                    });
                }
                if c < cost {
                    accepted = Some((new_x, new_u, c));
                    break;
                }
                alpha *= 0.5;
            }
        }
        match accepted {
            Some((new_x, new_u, c)) => {
                let gain = cost - c;
                xs = new_x;
                u = new_u;
                cost = c;
                history.push(c);
                mu = if mu > 1e-6 { mu * 0.1 } else { 0.0 };
                if gain < settings.tolerance * cost.abs().max(1.0) && relax_done(w_x) {
                    converged = true;
                    break;
                }
            }
            None => {
                if relax_done(w_x) && mu >= 1e8 {
                    converged = true;
                    break;
                }
                if relax_done(w_x) || mu < 1e8 {
                    mu = (mu * 10.0).max(1e-6);
                }
            }
        }
    }
    let warning = (!converged).then(|| format!("iteration cap {} reached before convergence", settings.max_iterations));
    if let Some(msg) = &warning {
        log::warn!("{msg}");
    }
    Ok(Solution {
        trajectory: Trajectory {
            dt: problem.dt,
            states: xs,
            controls: u,
            keyframes: problem.keyframes.clone(),
            phases: problem.phases.clone(),
        },
        cost_history: history,
        iterations,
        converged,
        warning,
        final_w_x: w_x,
    })
}
