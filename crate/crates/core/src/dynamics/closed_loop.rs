use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg;
use crate::riccati_lqt::{ErrorMap, LinearSystem, PolicyCache, QuadraticCost, TrackingPolicy};

/// Closes the loop of `target_plant` under `policy`, a tracker synthesized
/// against a stationary anchor, holding the fixed state `reference`:
///
/// ```text
/// ẏ = (A − BK_x) y + B(u_ff − K_r r) + c
/// ```
pub fn closed_loop_target(target_plant: &LinearSystem, policy: &TrackingPolicy, reference: &DVector<f64>) -> Result<LinearSystem> {
    let d = target_plant.state_dim();
    let core = policy.core();
    if reference.len() != d || core.agent_dim() != d || core.target_dim() != d || policy.input_dim() != target_plant.input_dim() {
        return Err(Error::DimensionMismatch(format!(
            "plant of dimension {d}, reference {}, policy {}x{}",
            reference.len(),
            core.agent_dim(),
            core.target_dim()
        )));
    }
    if core.agent_gain().iter().all(|&v| v == 0.0) {
        return Err(Error::DegeneratePolicy("tracker gain is identically zero".into()));
    }
    let drift = target_plant.drift() - target_plant.input() * core.agent_gain();
    if linalg::spectral_abscissa(&drift)? >= 0.0 {
        return Err(Error::DegeneratePolicy("closed loop is not Hurwitz".into()));
    }
    let offset = target_plant.offset() + target_plant.input() * (policy.feedforward() - core.target_gain() * reference);
    LinearSystem::autonomous(drift, offset)
}

/// Synthesizes a tracker that drives `plant` to `reference` and returns the
/// resulting closed loop.
pub fn closed_loop_about(plant: &LinearSystem, cost: &QuadraticCost, reference: &DVector<f64>, cache: &PolicyCache) -> Result<LinearSystem> {
    let d = plant.state_dim();
    let policy = cache.tracker(plant, &LinearSystem::stationary(d)?, cost, &ErrorMap::Difference)?;
    closed_loop_target(plant, &policy, reference)
}
