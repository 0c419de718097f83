//! Engagement simulation with capture, reassignment and cost accounting.

pub mod pair;
pub mod sim;
pub mod state;
pub mod trace;

pub use pair::PairDynamics;
pub use sim::{assign, run_dynamics_policy, run_emd_policy, run_engagement, swarm_state_at, Assignment};
pub use state::{capture_check, Engagement, EngagementConfig, SwarmState};
pub use trace::{AgentSample, AssignmentRecord, SimulationTrace, TargetSample, TerminalStatus, TraceSummary};
