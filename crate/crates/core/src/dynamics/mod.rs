//! Agent and target dynamics, closed-loop construction and integration.

pub mod closed_loop;
pub mod models;
pub mod ode;

pub use closed_loop::{closed_loop_about, closed_loop_target};
pub use models::{double_integrator_3d, quadcopter, DynamicsModel, QuadcopterParams, StateLayout};
pub use ode::{integrate, integrate_grid, Flow, OdeConfig, OdeOutcome, Trajectory};
