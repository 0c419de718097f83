//! Riccati-based linear-quadratic tracking between an agent and a target.

mod cache;
mod care;
mod system;
mod tracker;

pub use cache::PolicyCache;
pub use care::{care_residual, is_detectable, is_stabilizable, is_symmetric_psd, min_symmetric_eigenvalue, solve_care};
pub use system::{LinearSystem, QuadraticCost};
pub use tracker::{
    cost_to_go, synthesize_tracker, synthesize_tracker_with, ErrorMap, SteadyState, TargetMode, TrackerCore,
    TrackingPolicy,
};

/// Relative Frobenius tolerance on the CARE residual.
pub const CARE_TOLERANCE: f64 = 1e-9;
/// Relative tolerance for symmetry and semidefiniteness checks.
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;
