use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::dynamics::{DynamicsModel, OdeConfig, StateLayout};
use crate::error::{Error, Result};
use crate::parallel::Execution;
use crate::riccati_lqt::{ErrorMap, LinearSystem, QuadraticCost};
use crate::transport::Metric;

/// States of both swarms with their active sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwarmState {
    pub time: f64,
    pub agent_states: Vec<DVector<f64>>,
    pub target_states: Vec<DVector<f64>>,
    pub active_agents: Vec<usize>,
    pub active_targets: Vec<usize>,
}

impl SwarmState {
    /// All agents and targets active at `t = 0`. Swarms must have equal size.
    pub fn new(agent_states: Vec<DVector<f64>>, target_states: Vec<DVector<f64>>) -> Result<Self> {
        if agent_states.len() != target_states.len() {
            return Err(Error::InvalidParameter {
                name: "n",
                reason: format!(
                    "{} agents and {} targets; the engine requires equal counts",
                    agent_states.len(),
                    target_states.len()
                ),
            });
        }
        if agent_states.is_empty() {
            return Err(Error::InvalidParameter {
                name: "n",
                reason: "swarm is empty".into(),
            });
        }
        let n = agent_states.len();
        Ok(Self {
            time: 0.0,
            agent_states,
            target_states,
            active_agents: (0..n).collect(),
            active_targets: (0..n).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.agent_states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agent_states.is_empty()
    }

    /// Removes agent `i` and target `j` together. Indices never return.
    pub fn deactivate_pair(&mut self, agent: usize, target: usize) {
        self.active_agents.retain(|&i| i != agent);
        self.active_targets.retain(|&j| j != target);
    }
}

/// `‖π_x(x) − π_y(y)‖ ≤ ε` (closed ball).
pub fn capture_check(agent: &[f64], agent_layout: &StateLayout, target: &[f64], target_layout: &StateLayout, radius: f64) -> bool {
    let pa = agent_layout.position();
    let pt = target_layout.position();
    let d2: f64 = agent[pa]
        .iter()
        .zip(&target[pt])
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    d2.sqrt() <= radius
}

/// Everything that defines one engagement apart from run settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Engagement {
    pub agent_model: DynamicsModel,
    pub target_layout: StateLayout,
    /// Closed-loop (autonomous) target dynamics, one per target.
    pub target_systems: Vec<LinearSystem>,
    pub cost: QuadraticCost,
    pub error_map: ErrorMap,
    pub initial: SwarmState,
}

impl Engagement {
    pub fn validate(&self) -> Result<()> {
        let n = self.initial.len();
        if self.target_systems.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} target systems for {n} targets",
                self.target_systems.len()
            )));
        }
        let dx = self.agent_model.state_dim();
        if let Some(x) = self.initial.agent_states.iter().find(|x| x.len() != dx) {
            return Err(Error::DimensionMismatch(format!("agent state of length {}, expected {dx}", x.len())));
        }
        for (y, s) in self.initial.target_states.iter().zip(&self.target_systems) {
            if y.len() != s.state_dim() || s.state_dim() != self.target_layout.dim() {
                return Err(Error::DimensionMismatch(format!(
                    "target state of length {}, system of dimension {}, layout of {}",
                    y.len(),
                    s.state_dim(),
                    self.target_layout.dim()
                )));
            }
            if !s.is_autonomous() {
                return Err(Error::InvalidParameter {
                    name: "target_systems",
                    reason: "targets must be closed-loop (no inputs)".into(),
                });
            }
        }
        Ok(())
    }
}

/// Run settings of one engagement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngagementConfig {
    pub capture_radius: f64,
    pub horizon: f64,
    /// Interval between reassignments under the Euclidean metric.
    pub reassign_interval: f64,
    pub integrator: OdeConfig,
    pub metric: Metric,
    #[serde(skip)]
    pub execution: Execution,
}

impl EngagementConfig {
    pub fn new(metric: Metric, capture_radius: f64, horizon: f64) -> Self {
        Self {
            capture_radius,
            horizon,
            reassign_interval: 0.1,
            integrator: OdeConfig::default(),
            metric,
            execution: Execution::default(),
        }
    }

    /// Number of output intervals in the horizon.
    pub fn horizon_steps(&self) -> usize {
        (self.horizon / self.integrator.output_dt).round() as usize
    }

    /// Number of output intervals between assignments.
    pub fn reassign_steps(&self) -> usize {
        match self.metric {
            Metric::Dynamics => self.horizon_steps(),
            Metric::Euclidean { .. } => (self.reassign_interval / self.integrator.output_dt).round() as usize,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.integrator.validate()?;
        let dt = self.integrator.output_dt;
        if !(self.capture_radius > 0.0) || !self.capture_radius.is_finite() {
            return Err(Error::InvalidParameter {
                name: "capture_radius",
                reason: format!("must be positive, got {}", self.capture_radius),
            });
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::InvalidParameter {
                name: "horizon",
                reason: format!("must be positive, got {}", self.horizon),
            });
        }
        if !is_grid_multiple(self.horizon, dt) {
            return Err(Error::InvalidParameter {
                name: "horizon",
                reason: format!("must be a multiple of the output step {dt}"),
            });
        }
        if let Metric::Euclidean { exponent } = self.metric {
            if !(exponent >= 1.0) || !exponent.is_finite() {
                return Err(Error::InvalidParameter {
                    name: "metric_exponent",
                    reason: format!("must be >= 1, got {exponent}"),
                });
            }
            if !(self.reassign_interval > 0.0) || !is_grid_multiple(self.reassign_interval, dt) {
                return Err(Error::InvalidParameter {
                    name: "reassign_interval",
                    reason: format!(
                        "must be a positive multiple of the output step {dt}, got {}",
                        self.reassign_interval
                    ),
                });
            }
        }
        Ok(())
    }
}

fn is_grid_multiple(span: f64, dt: f64) -> bool {
    let k = (span / dt).round();
    k >= 1.0 && (span - k * dt).abs() <= 1e-9 * dt.max(span)
}
