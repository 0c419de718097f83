//! Infinite-horizon linear-quadratic tracking of an autonomous target.
//!
//! The agent `ẋ = Ax + Bu + c_a` tracks a target `ẏ = Ãy + c_t`. With the
//! joint state `z = [x; y]` and error `e = C_x x − C_y y`, the stage cost is
//!
//! ```text
//! g = eᵀQe + uᵀRu − (e_ssᵀQe_ss + u_ssᵀRu_ss)
//! ```
//!
//! and the optimal differential value function is `V(z) = zᵀPz + 2pᵀz`,
//! where `P` solves the joint Riccati equation and `p` the adjoint equation
//! `(F − SP)ᵀp = −P c` of the affine drive. The optimal control is
//! `u = −K z + u_ff` and the cost of steering from `z₀` to the steady state
//! is `V(z₀) − V(z_ss)`.
//!
//! The joint Riccati solution is assembled block-wise. The target block is
//! uncontrolled, so
//!
//! * `P_xx` solves the agent CARE with weight `C_xᵀQC_x`,
//! * `P_xy` solves the Sylvester equation `A_clᵀP_xy + P_xyÃ = C_xᵀQC_y`,
//! * `P_yy` solves the Lyapunov equation of the target block.
//!
//! This also covers a stationary reference (`Ã = 0`, `c_t = 0`), whose
//! Lyapunov block is singular; there `y` is constant, `P_yy` and `p_y`
//! cancel out of every cost difference and are stored as zero.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, LU, Dyn};
use serde::{Deserialize, Serialize};

use super::care::solve_care;
use super::system::{LinearSystem, QuadraticCost};
use crate::error::{Error, Result};
use crate::linalg;

/// How the tracking error is formed from agent and target states.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub enum ErrorMap {
    /// `f(x, y) = x − y`; agent and target share a state layout.
    #[default]
    Difference,
    /// `f(x, y) = C_x x − C_y y`, e.g. position selectors.
    Selectors {
        agent: DMatrix<f64>,
        target: DMatrix<f64>,
    },
}

impl ErrorMap {
    /// Returns `(C_x, C_y)` for the given state dimensions.
    pub fn matrices(&self, agent_dim: usize, target_dim: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        match self {
            ErrorMap::Difference => {
                if agent_dim != target_dim {
                    return Err(Error::DimensionMismatch(format!(
                        "difference error map needs equal dimensions, got {agent_dim} and {target_dim}"
                    )));
                }
                Ok((
                    DMatrix::identity(agent_dim, agent_dim),
                    DMatrix::identity(target_dim, target_dim),
                ))
            }
            ErrorMap::Selectors { agent, target } => {
                if agent.ncols() != agent_dim || target.ncols() != target_dim || agent.nrows() != target.nrows() {
                    return Err(Error::DimensionMismatch(format!(
                        "selectors {:?} / {:?} for dimensions {agent_dim} / {target_dim}",
                        agent.shape(),
                        target.shape()
                    )));
                }
                Ok((agent.clone(), target.clone()))
            }
        }
    }
}

/// Whether the tracked system settles to a state-independent equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TargetMode {
    /// Hurwitz drift: converges to `−Ã⁻¹c_t` from any initial state.
    Decaying,
    /// Zero drift, zero offset: the target never moves.
    Stationary,
}

type Lu = LU<f64, Dyn, Dyn>;

/// The part of a tracker that depends only on the dynamics and weights:
/// Riccati blocks, gains and factorizations. Shared between all pairs with
/// the same agent/target dynamics.
#[derive(Debug, Clone)]
pub struct TrackerCore {
    agent_dim: usize,
    target_dim: usize,
    input: DMatrix<f64>,
    target_drift: DMatrix<f64>,
    error_agent: DMatrix<f64>,
    error_target: DMatrix<f64>,
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    /// `R⁻¹Bᵀ`
    r_inv_bt: DMatrix<f64>,
    /// `BR⁻¹Bᵀ`
    s: DMatrix<f64>,
    p_xx: DMatrix<f64>,
    p_xy: DMatrix<f64>,
    p_yy: DMatrix<f64>,
    gain_x: DMatrix<f64>,
    gain_y: DMatrix<f64>,
    closed_loop: DMatrix<f64>,
    closed_loop_lu: Lu,
    closed_loop_t_lu: Lu,
    target_lu: Option<(Lu, Lu)>,
    mode: TargetMode,
}

impl TrackerCore {
    pub fn new(
        agent_drift: &DMatrix<f64>,
        agent_input: &DMatrix<f64>,
        target_drift: &DMatrix<f64>,
        cost: &QuadraticCost,
        error_map: &ErrorMap,
    ) -> Result<Self> {
        let dx = agent_drift.nrows();
        let dy = target_drift.nrows();
        if agent_input.ncols() == 0 {
            return Err(Error::InvalidParameter {
                name: "agent",
                reason: "agent has no inputs".into(),
            });
        }
        let (cx, cy) = error_map.matrices(dx, dy)?;
        let q = cost.state_weight();
        let r = cost.control_weight();
        if q.nrows() != cx.nrows() || r.nrows() != agent_input.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "weights Q {:?}, R {:?} for error dim {} and input dim {}",
                q.shape(),
                r.shape(),
                cx.nrows(),
                agent_input.ncols()
            )));
        }

        let mode = if target_drift.iter().all(|&v| v == 0.0) {
            TargetMode::Stationary
        } else if linalg::spectral_abscissa(target_drift)? < -1e-9 * (1.0 + target_drift.amax()) {
            TargetMode::Decaying
        } else {
            return Err(Error::SteadyStateUndefined(
                "target drift has a non-decaying mode".into(),
            ));
        };

        let q_x = linalg::symmetrize(&(cx.transpose() * q * &cx));
        let agent_cost = QuadraticCost::new(q_x, r.clone())?;
        let p_xx = solve_care(agent_drift, agent_input, &agent_cost)?;

        let r_chol = r.clone().cholesky().ok_or(Error::InvalidParameter {
            name: "control_weight",
            reason: "not positive definite".into(),
        })?;
        let r_inv_bt = r_chol.solve(&agent_input.transpose());
        let s = agent_input * &r_inv_bt;
        let gain_x = &r_inv_bt * &p_xx;
        let closed_loop = agent_drift - agent_input * &gain_x;
        if linalg::spectral_abscissa(&closed_loop)? >= 0.0 {
            return Err(Error::NotStabilizable);
        }

        let cross = cx.transpose() * q * &cy;
        let p_xy = linalg::solve_sylvester(&closed_loop.transpose(), target_drift, &cross)?;
        let gain_y = &r_inv_bt * &p_xy;

        let p_yy = match mode {
            TargetMode::Decaying => {
                let m_yy = cy.transpose() * q * &cy;
                let forcing = m_yy - p_xy.transpose() * &s * &p_xy;
                linalg::solve_lyapunov(target_drift, &forcing)?
            }
            TargetMode::Stationary => DMatrix::zeros(dy, dy),
        };

        let target_lu = match mode {
            TargetMode::Decaying => Some((target_drift.clone().lu(), target_drift.transpose().lu())),
            TargetMode::Stationary => None,
        };

        Ok(Self {
            agent_dim: dx,
            target_dim: dy,
            input: agent_input.clone(),
            target_drift: target_drift.clone(),
            error_agent: cx,
            error_target: cy,
            q: q.clone(),
            r: r.clone(),
            r_inv_bt,
            s,
            p_xx,
            p_xy,
            p_yy,
            gain_x,
            gain_y,
            closed_loop_lu: closed_loop.clone().lu(),
            closed_loop_t_lu: closed_loop.transpose().lu(),
            closed_loop,
            target_lu,
            mode,
        })
    }

    pub fn mode(&self) -> TargetMode {
        self.mode
    }

    pub fn agent_dim(&self) -> usize {
        self.agent_dim
    }

    pub fn target_dim(&self) -> usize {
        self.target_dim
    }

    /// Agent-block Riccati solution.
    pub fn agent_riccati(&self) -> &DMatrix<f64> {
        &self.p_xx
    }

    /// Joint Riccati solution `[[P_xx, P_xy], [P_yx, P_yy]]`.
    pub fn riccati_solution(&self) -> DMatrix<f64> {
        let (dx, dy) = (self.agent_dim, self.target_dim);
        let mut p = DMatrix::zeros(dx + dy, dx + dy);
        p.view_mut((0, 0), (dx, dx)).copy_from(&self.p_xx);
        p.view_mut((0, dx), (dx, dy)).copy_from(&self.p_xy);
        p.view_mut((dx, 0), (dy, dx)).copy_from(&self.p_xy.transpose());
        p.view_mut((dx, dx), (dy, dy)).copy_from(&self.p_yy);
        p
    }

    /// Joint feedback gain `[K_x, K_y]`.
    pub fn gain(&self) -> DMatrix<f64> {
        let (dx, dy) = (self.agent_dim, self.target_dim);
        let mut k = DMatrix::zeros(self.input.ncols(), dx + dy);
        k.view_mut((0, 0), (k.nrows(), dx)).copy_from(&self.gain_x);
        k.view_mut((0, dx), (k.nrows(), dy)).copy_from(&self.gain_y);
        k
    }

    pub fn agent_gain(&self) -> &DMatrix<f64> {
        &self.gain_x
    }

    pub fn target_gain(&self) -> &DMatrix<f64> {
        &self.gain_y
    }

    /// `A − B K_x`.
    pub fn closed_loop_drift(&self) -> &DMatrix<f64> {
        &self.closed_loop
    }

    /// `(C_x, C_y)` with `e = C_x x − C_y y`.
    pub fn error_matrices(&self) -> (&DMatrix<f64>, &DMatrix<f64>) {
        (&self.error_agent, &self.error_target)
    }

    pub fn state_weight(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn control_weight(&self) -> &DMatrix<f64> {
        &self.r
    }
}

/// Agent/target pair at its tracking equilibrium.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    pub agent: DVector<f64>,
    pub target: DVector<f64>,
    pub error: DVector<f64>,
    pub control: DVector<f64>,
    /// `e_ssᵀQe_ss + u_ssᵀRu_ss`
    pub stage_cost: f64,
}

/// Synthesized 1v1 tracking controller `u = −K z + u_ff`.
#[derive(Debug, Clone)]
pub struct TrackingPolicy {
    core: Arc<TrackerCore>,
    error_map: ErrorMap,
    adjoint: DVector<f64>,
    feedforward: DVector<f64>,
    agent_offset: DVector<f64>,
    target_offset: DVector<f64>,
    steady: Option<SteadyState>,
}

impl TrackingPolicy {
    /// Completes a policy from a shared core with the pair's affine terms.
    pub fn from_core(
        core: Arc<TrackerCore>,
        error_map: ErrorMap,
        agent: &LinearSystem,
        target: &LinearSystem,
    ) -> Result<Self> {
        if agent.state_dim() != core.agent_dim || target.state_dim() != core.target_dim {
            return Err(Error::DimensionMismatch(format!(
                "policy core is {}x{}, systems are {}x{}",
                core.agent_dim,
                core.target_dim,
                agent.state_dim(),
                target.state_dim()
            )));
        }
        if core.mode == TargetMode::Stationary && !target.is_stationary() {
            return Err(Error::SteadyStateUndefined(
                "target has zero drift but a non-zero offset".into(),
            ));
        }
        let c_a = agent.offset().clone();
        let c_t = target.offset().clone();

        // x-row of (F − SP)ᵀ p = −P c
        let rhs_x = -(&core.p_xx * &c_a + &core.p_xy * &c_t);
        let p_x = core
            .closed_loop_t_lu
            .solve(&rhs_x)
            .ok_or_else(|| Error::SteadyStateUndefined("closed loop is singular".into()))?;
        let p_y = match &core.target_lu {
            Some((_, target_t_lu)) => {
                let rhs_y = core.p_xy.transpose() * (&core.s * &p_x - &c_a) - &core.p_yy * &c_t;
                target_t_lu
                    .solve(&rhs_y)
                    .ok_or_else(|| Error::SteadyStateUndefined("target drift is singular".into()))?
            }
            None => DVector::zeros(core.target_dim),
        };
        let feedforward = -(&core.r_inv_bt * &p_x);

        let mut adjoint = DVector::zeros(core.agent_dim + core.target_dim);
        adjoint.rows_mut(0, core.agent_dim).copy_from(&p_x);
        adjoint.rows_mut(core.agent_dim, core.target_dim).copy_from(&p_y);

        let mut policy = Self {
            core,
            error_map,
            adjoint,
            feedforward,
            agent_offset: c_a,
            target_offset: c_t,
            steady: None,
        };
        if let Some((target_lu, _)) = &policy.core.target_lu {
            let y_ss = -target_lu
                .solve(&policy.target_offset)
                .ok_or_else(|| Error::SteadyStateUndefined("target drift is singular".into()))?;
            policy.steady = Some(policy.equilibrium_for(&y_ss)?);
        }
        Ok(policy)
    }

    fn equilibrium_for(&self, y_ss: &DVector<f64>) -> Result<SteadyState> {
        let core = &self.core;
        // (A − BK_x) x = B(K_y y − u_ff) − c_a
        let rhs = &core.input * (&core.gain_y * y_ss - &self.feedforward) - &self.agent_offset;
        let x_ss = core
            .closed_loop_lu
            .solve(&rhs)
            .ok_or_else(|| Error::SteadyStateUndefined("closed loop is singular".into()))?;
        let u_ss = self.control(&x_ss, y_ss);
        let e_ss = self.error(&x_ss, y_ss);
        let stage_cost = linalg::quad_form(&core.q, &e_ss) + linalg::quad_form(&core.r, &u_ss);
        Ok(SteadyState {
            agent: x_ss,
            target: y_ss.clone(),
            error: e_ss,
            control: u_ss,
            stage_cost,
        })
    }

    /// Equilibrium reached from the given target state.
    pub fn steady_state(&self, target_state: &DVector<f64>) -> Result<SteadyState> {
        match &self.steady {
            Some(ss) => Ok(ss.clone()),
            None => self.equilibrium_for(target_state),
        }
    }

    /// Equilibrium if it does not depend on the target state.
    pub fn fixed_steady_state(&self) -> Option<&SteadyState> {
        self.steady.as_ref()
    }

    pub fn core(&self) -> &Arc<TrackerCore> {
        &self.core
    }

    pub fn error_map(&self) -> &ErrorMap {
        &self.error_map
    }

    pub fn gain(&self) -> DMatrix<f64> {
        self.core.gain()
    }

    pub fn feedforward(&self) -> &DVector<f64> {
        &self.feedforward
    }

    pub fn riccati_solution(&self) -> DMatrix<f64> {
        self.core.riccati_solution()
    }

    pub fn adjoint_term(&self) -> &DVector<f64> {
        &self.adjoint
    }

    pub fn target_offset(&self) -> &DVector<f64> {
        &self.target_offset
    }

    pub fn agent_offset(&self) -> &DVector<f64> {
        &self.agent_offset
    }

    pub fn input_dim(&self) -> usize {
        self.core.input.ncols()
    }

    pub fn control(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        -(&self.core.gain_x * x) - &self.core.gain_y * y + &self.feedforward
    }

    pub fn error(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        &self.core.error_agent * x - &self.core.error_target * y
    }

    /// Instantaneous tracking cost with the steady-state terms removed.
    pub fn stage_cost(&self, x: &DVector<f64>, y: &DVector<f64>, u: &DVector<f64>, steady: &SteadyState) -> f64 {
        let e = self.error(x, y);
        linalg::quad_form(&self.core.q, &e) + linalg::quad_form(&self.core.r, u) - steady.stage_cost
    }

    /// `zᵀPz + 2pᵀz` on the joint state.
    pub fn value_function(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        let z = self.joint(x, y);
        linalg::quad_form(&self.core.riccati_solution(), &z) + 2.0 * self.adjoint.dot(&z)
    }

    fn joint(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        let mut z = DVector::zeros(x.len() + y.len());
        z.rows_mut(0, x.len()).copy_from(x);
        z.rows_mut(x.len(), y.len()).copy_from(y);
        z
    }

    /// Optimal cost of tracking the target from the given initial states:
    /// `V(z₀) − V(z_ss)`, evaluated as `δᵀPδ + 2(Pz_ss + p)ᵀδ` with
    /// `δ = z₀ − z_ss` to avoid cancellation at large state magnitudes.
    pub fn cost_to_go(&self, agent_state: &DVector<f64>, target_state: &DVector<f64>) -> Result<f64> {
        let core = &self.core;
        if agent_state.len() != core.agent_dim || target_state.len() != core.target_dim {
            return Err(Error::DimensionMismatch(format!(
                "states of length {} / {}, policy expects {} / {}",
                agent_state.len(),
                target_state.len(),
                core.agent_dim,
                core.target_dim
            )));
        }
        let ss = self.steady_state(target_state)?;
        let dx = agent_state - &ss.agent;
        let dy = target_state - &ss.target;
        // gradient / 2 at the steady state: P z_ss + p
        let grad_x = &core.p_xx * &ss.agent + &core.p_xy * &ss.target + self.adjoint.rows(0, core.agent_dim);
        let grad_y = core.p_xy.tr_mul(&ss.agent)
            + &core.p_yy * &ss.target
            + self.adjoint.rows(core.agent_dim, core.target_dim);
        let quad = linalg::quad_form(&core.p_xx, &dx)
            + 2.0 * dx.dot(&(&core.p_xy * &dy))
            + linalg::quad_form(&core.p_yy, &dy);
        Ok(quad + 2.0 * (grad_x.dot(&dx) + grad_y.dot(&dy)))
    }

    /// Joint closed-loop dynamics `ż = F_cl z + f₀` under this policy.
    pub fn closed_loop_joint(&self) -> (DMatrix<f64>, DVector<f64>) {
        let core = &self.core;
        let (dx, dy) = (core.agent_dim, core.target_dim);
        let mut f = DMatrix::zeros(dx + dy, dx + dy);
        f.view_mut((0, 0), (dx, dx)).copy_from(&core.closed_loop);
        f.view_mut((0, dx), (dx, dy)).copy_from(&(-(&core.input * &core.gain_y)));
        f.view_mut((dx, dx), (dy, dy)).copy_from(&core.target_drift);
        let mut f0 = DVector::zeros(dx + dy);
        f0.rows_mut(0, dx)
            .copy_from(&(&core.input * &self.feedforward + &self.agent_offset));
        f0.rows_mut(dx, dy).copy_from(&self.target_offset);
        (f, f0)
    }
}

/// Builds the tracking policy of `agent` against the autonomous `target`
/// using the difference error map.
pub fn synthesize_tracker(agent: &LinearSystem, target: &LinearSystem, cost: &QuadraticCost) -> Result<TrackingPolicy> {
    synthesize_tracker_with(agent, target, cost, &ErrorMap::Difference)
}

pub fn synthesize_tracker_with(
    agent: &LinearSystem,
    target: &LinearSystem,
    cost: &QuadraticCost,
    error_map: &ErrorMap,
) -> Result<TrackingPolicy> {
    if !target.is_autonomous() {
        return Err(Error::InvalidParameter {
            name: "target",
            reason: "target must be autonomous (input_dim = 0)".into(),
        });
    }
    let core = TrackerCore::new(agent.drift(), agent.input(), target.drift(), cost, error_map)?;
    TrackingPolicy::from_core(Arc::new(core), error_map.clone(), agent, target)
}

/// Computes the optimal tracking cost for one pair.
pub fn cost_to_go(policy: &TrackingPolicy, agent_state: &DVector<f64>, target_state: &DVector<f64>) -> Result<f64> {
    policy.cost_to_go(agent_state, target_state)
}
