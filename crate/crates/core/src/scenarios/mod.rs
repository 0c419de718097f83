//! Seeded scenario generation and the paired Monte Carlo harness.

pub mod generate;
pub mod monte_carlo;
pub mod rng;

pub use generate::{generate, position_selector, Scenario, ScenarioSpec, SliceBounds, World};
pub use monte_carlo::{
    monte_carlo, run_pair, Aggregates, Histogram, MonteCarloReport, MonteCarloSettings, PairedRun, RunRecord, RunTiming,
};
pub use rng::{derive_seed, ScenarioRng};
