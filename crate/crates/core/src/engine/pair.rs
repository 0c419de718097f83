use nalgebra::{DMatrix, DVector, DVectorView, DVectorViewMut};

use crate::error::Result;
use crate::riccati_lqt::TrackingPolicy;

/// Joint closed-loop dynamics of one agent tracking one target, laid out
/// for fast right-hand-side evaluation: `z = [x; y; J]` with
/// `ż = F z + f₀` and `J̇ = g(x, y, u)`.
#[derive(Debug, Clone)]
pub struct PairDynamics {
    agent_dim: usize,
    joint_dim: usize,
    drift: DMatrix<f64>,
    offset: DVector<f64>,
    gain: DMatrix<f64>,
    feedforward: DVector<f64>,
    /// `[C_x, −C_y]`
    error_map: DMatrix<f64>,
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    steady_stage_cost: f64,
}

/// Scratch buffers for [`PairDynamics::rhs`].
#[derive(Debug, Clone)]
pub struct PairWork {
    e: DVector<f64>,
    qe: DVector<f64>,
    u: DVector<f64>,
    ru: DVector<f64>,
}

impl PairDynamics {
    /// `target_state` fixes the equilibrium when the target is stationary.
    pub fn new(policy: &TrackingPolicy, target_state: &DVector<f64>) -> Result<Self> {
        let core = policy.core();
        let (drift, offset) = policy.closed_loop_joint();
        let (cx, cy) = core.error_matrices();
        let (dx, dy) = (core.agent_dim(), core.target_dim());
        let mut error_map = DMatrix::zeros(cx.nrows(), dx + dy);
        error_map.view_mut((0, 0), (cx.nrows(), dx)).copy_from(cx);
        error_map.view_mut((0, dx), (cy.nrows(), dy)).copy_from(&(-cy));
        let steady_stage_cost = policy.steady_state(target_state)?.stage_cost;
        Ok(Self {
            agent_dim: dx,
            joint_dim: dx + dy,
            drift,
            offset,
            gain: policy.gain(),
            feedforward: policy.feedforward().clone(),
            error_map,
            q: core.state_weight().clone(),
            r: core.control_weight().clone(),
            steady_stage_cost,
        })
    }

    pub fn agent_dim(&self) -> usize {
        self.agent_dim
    }

    /// Joint state dimension without the cost entry.
    pub fn joint_dim(&self) -> usize {
        self.joint_dim
    }

    pub fn work(&self) -> PairWork {
        PairWork {
            e: DVector::zeros(self.error_map.nrows()),
            qe: DVector::zeros(self.error_map.nrows()),
            u: DVector::zeros(self.gain.nrows()),
            ru: DVector::zeros(self.gain.nrows()),
        }
    }

    pub fn rhs(&self, z: &[f64], dz: &mut [f64], w: &mut PairWork) {
        let n = self.joint_dim;
        let zv = DVectorView::from_slice(&z[..n], n);
        let mut out = DVectorViewMut::from_slice(&mut dz[..n], n);
        out.copy_from(&self.offset);
        out.gemv(1.0, &self.drift, &zv, 1.0);
        dz[n] = self.stage_cost_with(&zv, w);
    }

    fn stage_cost_with(&self, zv: &DVectorView<'_, f64>, w: &mut PairWork) -> f64 {
        w.e.gemv(1.0, &self.error_map, zv, 0.0);
        w.u.copy_from(&self.feedforward);
        w.u.gemv(-1.0, &self.gain, zv, 1.0);
        w.qe.gemv(1.0, &self.q, &w.e, 0.0);
        w.ru.gemv(1.0, &self.r, &w.u, 0.0);
        w.e.dot(&w.qe) + w.u.dot(&w.ru) - self.steady_stage_cost
    }

    /// `u = −K z + u_ff`
    pub fn control(&self, z: &[f64]) -> DVector<f64> {
        let zv = DVectorView::from_slice(&z[..self.joint_dim], self.joint_dim);
        &self.feedforward - &self.gain * zv
    }

    /// Instantaneous stage cost at the joint state.
    pub fn stage_cost(&self, z: &[f64]) -> f64 {
        let zv = DVectorView::from_slice(&z[..self.joint_dim], self.joint_dim);
        let mut w = self.work();
        self.stage_cost_with(&zv, &mut w)
    }
}
