use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::rng::ScenarioRng;
use crate::dynamics::{closed_loop_about, double_integrator_3d, quadcopter, DynamicsModel, QuadcopterParams};
use crate::engine::{Engagement, SwarmState};
use crate::error::{Error, Result};
use crate::riccati_lqt::{ErrorMap, PolicyCache, QuadraticCost};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum World {
    DoubleIntegrator,
    Quadcopter,
}

impl World {
    pub fn name(self) -> &'static str {
        match self {
            World::DoubleIntegrator => "double-integrator",
            World::Quadcopter => "quadcopter",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "double-integrator" => Some(World::DoubleIntegrator),
            "quadcopter" => Some(World::Quadcopter),
            _ => None,
        }
    }

    pub fn default_capture_radius(self) -> f64 {
        match self {
            World::DoubleIntegrator => 1.0,
            World::Quadcopter => 0.5,
        }
    }

    pub fn default_horizon(self) -> f64 {
        match self {
            World::DoubleIntegrator => 10.0,
            World::Quadcopter => 5.0,
        }
    }
}

/// Uniform bounds for every entry of one named state slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceBounds {
    pub slice: String,
    pub low: f64,
    pub high: f64,
}

impl SliceBounds {
    pub fn new(slice: &str, low: f64, high: f64) -> Self {
        Self {
            slice: slice.into(),
            low,
            high,
        }
    }

    fn symmetric(slice: &str, half: f64) -> Self {
        Self::new(slice, -half, half)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub world: World,
    pub n: usize,
    pub seed: u64,
    /// Slices without bounds start at zero.
    pub agent_bounds: Vec<SliceBounds>,
    pub target_bounds: Vec<SliceBounds>,
    /// Bounds of each coordinate of the targets' stationary locations.
    pub terminal_bounds: (f64, f64),
    /// Diagonal of the error weight `Q`.
    pub state_weight: Vec<f64>,
    /// Diagonal of the control weight `R`.
    pub control_weight: Vec<f64>,
    pub quadcopter: QuadcopterParams,
}

impl ScenarioSpec {
    /// Distributions and weights of the benchmark worlds.
    pub fn benchmark(world: World, n: usize, seed: u64) -> Self {
        match world {
            World::DoubleIntegrator => Self {
                world,
                n,
                seed,
                agent_bounds: vec![
                    SliceBounds::symmetric("position", 1000.0),
                    SliceBounds::symmetric("velocity", 5000.0),
                ],
                target_bounds: vec![
                    SliceBounds::symmetric("position", 1000.0),
                    SliceBounds::symmetric("velocity", 1000.0),
                ],
                terminal_bounds: (-1000.0, 1000.0),
                state_weight: vec![1e3, 1e3, 1e3, 0.0, 0.0, 0.0],
                control_weight: vec![1.0; 3],
                quadcopter: QuadcopterParams::default(),
            },
            World::Quadcopter => Self {
                world,
                n,
                seed,
                agent_bounds: vec![
                    SliceBounds::symmetric("position", 100.0),
                    SliceBounds::symmetric("attitude", 2.0 * PI),
                    SliceBounds::symmetric("velocity", 500.0),
                    SliceBounds::symmetric("rates", 25.0),
                ],
                target_bounds: vec![
                    SliceBounds::symmetric("position", 100.0),
                    SliceBounds::symmetric("attitude", 2.0 * PI),
                    SliceBounds::symmetric("velocity", 50.0),
                    SliceBounds::symmetric("rates", 25.0),
                ],
                terminal_bounds: (-100.0, 100.0),
                state_weight: [vec![1e3; 6], vec![0.0; 6]].concat(),
                control_weight: vec![1.0; 4],
                quadcopter: QuadcopterParams::default(),
            },
        }
    }

    pub fn model(&self) -> Result<DynamicsModel> {
        match self.world {
            World::DoubleIntegrator => Ok(double_integrator_3d()),
            World::Quadcopter => quadcopter(self.quadcopter),
        }
    }

    pub fn cost(&self) -> Result<QuadraticCost> {
        QuadraticCost::diagonal(&self.state_weight, &self.control_weight)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidParameter {
                name: "n",
                reason: "must be at least 1".into(),
            });
        }
        let model = self.model()?;
        for (name, bounds) in [("agent_bounds", &self.agent_bounds), ("target_bounds", &self.target_bounds)] {
            for b in bounds {
                if model.layout.slice(&b.slice).is_none() {
                    return Err(Error::InvalidParameter {
                        name,
                        reason: format!("unknown slice `{}` for {}", b.slice, self.world.name()),
                    });
                }
                if !(b.low < b.high) || !b.low.is_finite() || !b.high.is_finite() {
                    return Err(Error::InvalidParameter {
                        name,
                        reason: format!("slice `{}` needs finite low < high, got [{}, {}]", b.slice, b.low, b.high),
                    });
                }
            }
        }
        let (lo, hi) = self.terminal_bounds;
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidParameter {
                name: "terminal_bounds",
                reason: format!("needs finite low < high, got [{lo}, {hi}]"),
            });
        }
        if self.state_weight.len() != model.state_dim() || self.control_weight.len() != model.input_dim() {
            return Err(Error::InvalidParameter {
                name: "weights",
                reason: format!(
                    "expected {} state and {} control weights, got {} and {}",
                    model.state_dim(),
                    model.input_dim(),
                    self.state_weight.len(),
                    self.control_weight.len()
                ),
            });
        }
        self.cost()?;
        Ok(())
    }
}

/// A generated engagement together with the targets' stationary references.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub spec: ScenarioSpec,
    pub engagement: Engagement,
    /// Stationary location drawn for each slot, in draw order.
    pub locations: Vec<DVector<f64>>,
    /// Target `j` settles at `locations[location_of[j]]`.
    pub location_of: Vec<usize>,
}

fn sample_state(rng: &mut ScenarioRng, model: &DynamicsModel, bounds: &[SliceBounds]) -> DVector<f64> {
    let mut x = DVector::zeros(model.state_dim());
    for b in bounds {
        let r = model.layout.slice(&b.slice).expect("validated slice");
        for k in r {
            x[k] = rng.uniform(b.low, b.high);
        }
    }
    x
}

/// Draws a scenario. Draw order: every agent state (slices in the order of
/// `agent_bounds`), every target state, every stationary location, then the
/// target-to-location permutation.
pub fn generate(spec: &ScenarioSpec) -> Result<Scenario> {
    spec.validate()?;
    let model = spec.model()?;
    let cost = spec.cost()?;
    let mut rng = ScenarioRng::new(spec.seed);
    let agents: Vec<DVector<f64>> = (0..spec.n).map(|_| sample_state(&mut rng, &model, &spec.agent_bounds)).collect();
    let targets: Vec<DVector<f64>> = (0..spec.n).map(|_| sample_state(&mut rng, &model, &spec.target_bounds)).collect();
    let pos = model.layout.position();
    let locations: Vec<DVector<f64>> = (0..spec.n)
        .map(|_| DVector::from_fn(pos.len(), |_, _| rng.uniform(spec.terminal_bounds.0, spec.terminal_bounds.1)))
        .collect();
    let location_of = rng.permutation(spec.n);

    let cache = PolicyCache::new();
    let target_systems = location_of
        .iter()
        .map(|&l| {
            let mut reference = DVector::zeros(model.state_dim());
            reference.rows_mut(pos.start, pos.len()).copy_from(&locations[l]);
            closed_loop_about(&model.system, &cost, &reference, &cache)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(Scenario {
        spec: spec.clone(),
        engagement: Engagement {
            target_layout: model.layout.clone(),
            agent_model: model,
            target_systems,
            cost,
            error_map: ErrorMap::Difference,
            initial: SwarmState::new(agents, targets)?,
        },
        locations,
        location_of,
    })
}

/// Position selector `[I 0]` for a layout whose position slice leads.
pub fn position_selector(model: &DynamicsModel) -> DMatrix<f64> {
    let pos = model.layout.position();
    let mut s = DMatrix::zeros(pos.len(), model.state_dim());
    for (r, c) in pos.enumerate() {
        s[(r, c)] = 1.0;
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_scenario() {
        let spec = ScenarioSpec::benchmark(World::DoubleIntegrator, 4, 11);
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a, b);
        let c = generate(&ScenarioSpec::benchmark(World::DoubleIntegrator, 4, 12)).unwrap();
        assert_ne!(a.engagement.initial, c.engagement.initial);
    }

    #[test]
    fn targets_settle_at_their_locations() {
        let s = generate(&ScenarioSpec::benchmark(World::Quadcopter, 3, 5)).unwrap();
        for (j, sys) in s.engagement.target_systems.iter().enumerate() {
            let mut r = DVector::zeros(12);
            r.rows_mut(0, 3).copy_from(&s.locations[s.location_of[j]]);
            // the closed loop is stiff, so compare equilibria rather than residuals
            let eq = sys.drift().clone().lu().solve(&(-sys.offset())).unwrap();
            assert!((eq - &r).amax() < 1e-6);
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut spec = ScenarioSpec::benchmark(World::DoubleIntegrator, 0, 1);
        assert!(matches!(spec.validate(), Err(Error::InvalidParameter { name: "n", .. })));
        spec.n = 2;
        spec.agent_bounds[0].low = 5000.0;
        assert!(spec.validate().is_err());
        let mut spec = ScenarioSpec::benchmark(World::DoubleIntegrator, 2, 1);
        spec.target_bounds.push(SliceBounds::new("attitude", 0.0, 1.0));
        assert!(spec.validate().is_err());
    }
}
