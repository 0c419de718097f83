//! Discrete optimal transport between agents and targets.

pub mod cost;
pub mod kantorovich;
pub mod matching;
pub mod measure;

pub use cost::{dynamics_cost, euclidean_cost, CostMatrix, DynamicsCost, Metric, TargetRef, FAILED_PAIR_COST};
pub use kantorovich::{solve_kantorovich, TransportPlan};
pub use matching::{solve_matching, Matching};
pub use measure::{check_simplex, Coupling, DiscreteMeasure};
