use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use nalgebra::DMatrix;

use super::system::{LinearSystem, QuadraticCost};
use super::tracker::{ErrorMap, TrackerCore, TrackingPolicy};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
struct CoreKey {
    agent_drift: DMatrix<f64>,
    agent_input: DMatrix<f64>,
    target_drift: DMatrix<f64>,
    cost: QuadraticCost,
    error_map: ErrorMap,
}

/// Memoizes tracker cores by (agent dynamics, target drift, weights, error
/// map). Keys compare exactly, so a hit returns the very same Riccati
/// solution.
#[derive(Debug, Default)]
pub struct PolicyCache {
    entries: Mutex<Vec<(CoreKey, Arc<TrackerCore>)>>,
    solves: AtomicUsize,
}

impl PolicyCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of Riccati syntheses performed (cache misses that succeeded
    /// or failed).
    pub fn solves(&self) -> usize {
        self.solves.load(Ordering::Relaxed)
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn core(
        &self,
        agent: &LinearSystem,
        target_drift: &DMatrix<f64>,
        cost: &QuadraticCost,
        error_map: &ErrorMap,
    ) -> Result<Arc<TrackerCore>> {
        let key = CoreKey {
            agent_drift: agent.drift().clone(),
            agent_input: agent.input().clone(),
            target_drift: target_drift.clone(),
            cost: cost.clone(),
            error_map: error_map.clone(),
        };
        // Held across the solve so concurrent callers never duplicate work
        // and the solve count stays deterministic.
        let mut entries = self.entries.lock().expect("cache lock");
        if let Some((_, core)) = entries.iter().find(|(k, _)| *k == key) {
            return Ok(core.clone());
        }
        self.solves.fetch_add(1, Ordering::Relaxed);
        let core = Arc::new(TrackerCore::new(agent.drift(), agent.input(), target_drift, cost, error_map)?);
        entries.push((key, core.clone()));
        Ok(core)
    }

    /// Tracker of `agent` against the autonomous `target`, reusing a cached
    /// core when one matches.
    pub fn tracker(
        &self,
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
        let core = self.core(agent, target.drift(), cost, error_map)?;
        TrackingPolicy::from_core(core, error_map.clone(), agent, target)
    }
}
