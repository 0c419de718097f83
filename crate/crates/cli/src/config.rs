//! Config resolution. Precedence: command-line flags, then the config file,
//! then built-in defaults. Every field that fell through to a default is
//! listed in `defaulted`.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use dotswarm::dynamics::OdeConfig;
use dotswarm::scenarios::{MonteCarloSettings, ScenarioSpec, World};
use dotswarm::Execution;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    Dyn,
    Emd,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Emit {
    Trace,
    Summary,
    Histogram,
    CumulativeCost,
}

/// Flags shared by `run` and `sweep`.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// TOML config file
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// double-integrator or quadcopter
    #[arg(long)]
    pub world: Option<String>,
    /// Swarm size (agents = targets)
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, value_enum)]
    pub policy: Option<Policy>,
    /// Exponent α of the Euclidean cost |x − y|^α
    #[arg(long)]
    pub metric_exponent: Option<f64>,
    #[arg(long)]
    pub capture_radius: Option<f64>,
    /// Simulated seconds
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Seconds between Euclidean reassignments
    #[arg(long)]
    pub reassign_interval: Option<f64>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Worker threads (default: all cores)
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Print the summary as JSON
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    #[serde(default)]
    scenario: FileScenario,
    #[serde(default)]
    engagement: FileEngagement,
    #[serde(default)]
    output: FileOutput,
    #[serde(default)]
    sweep: FileSweep,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileScenario {
    world: Option<String>,
    n: Option<usize>,
    seed: Option<u64>,
    state_weight: Option<Vec<f64>>,
    control_weight: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileEngagement {
    policy: Option<Policy>,
    capture_radius: Option<f64>,
    horizon: Option<f64>,
    reassign_interval: Option<f64>,
    metric_exponent: Option<f64>,
    rel_tol: Option<f64>,
    abs_tol: Option<f64>,
    max_step: Option<f64>,
    output_dt: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileOutput {
    dir: Option<PathBuf>,
    emit: Option<Vec<Emit>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileSweep {
    sizes: Option<Vec<usize>>,
    runs: Option<usize>,
    histogram_bins: Option<usize>,
}

/// Everything that determines the artifacts. The output directory and the
/// thread count are deliberately absent: neither changes a byte of output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Resolved {
    pub world: World,
    pub n: usize,
    pub seed: u64,
    pub policy: Policy,
    pub state_weight: Vec<f64>,
    pub control_weight: Vec<f64>,
    pub capture_radius: f64,
    pub horizon: f64,
    pub reassign_interval: f64,
    pub metric_exponent: f64,
    pub integrator: OdeConfig,
    pub emit: BTreeSet<Emit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    pub defaulted: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepConfig {
    pub sizes: Vec<usize>,
    pub runs: usize,
    pub histogram_bins: usize,
}

pub struct Setup {
    pub resolved: Resolved,
    pub output_dir: PathBuf,
    pub jobs: Option<usize>,
}

fn read_file(path: &Path) -> Result<FileConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))
}

/// Picks the first present value and records the field when none was.
struct Picker {
    defaulted: Vec<String>,
}

impl Picker {
    fn pick<T>(&mut self, name: &str, flag: Option<T>, file: Option<T>, default: impl FnOnce() -> T) -> T {
        flag.or(file).unwrap_or_else(|| {
            self.defaulted.push(name.to_string());
            default()
        })
    }
}

pub fn resolve(args: &CommonArgs, sweep: Option<(Option<Vec<usize>>, Option<usize>)>) -> Result<Setup, CliError> {
    let file = match &args.config {
        Some(p) => read_file(p)?,
        None => FileConfig::default(),
    };
    let mut p = Picker { defaulted: Vec::new() };
    let world_name = p.pick(
        "scenario.world",
        args.world.clone(),
        file.scenario.world.clone(),
        || World::DoubleIntegrator.name().to_string(),
    );
    let world = World::parse(&world_name).ok_or_else(|| {
        CliError::Config(format!(
            "scenario.world: unknown world `{world_name}` (expected double-integrator or quadcopter)"
        ))
    })?;
    let bench = ScenarioSpec::benchmark(world, 1, 0);
    let n = p.pick("scenario.n", args.n, file.scenario.n, || 5);
    let seed = p.pick("scenario.seed", args.seed, file.scenario.seed, || 0);
    let state_weight = p.pick("scenario.state_weight", None, file.scenario.state_weight, || bench.state_weight.clone());
    let control_weight = p.pick("scenario.control_weight", None, file.scenario.control_weight, || {
        bench.control_weight.clone()
    });
    let e = &file.engagement;
    let policy = p.pick("engagement.policy", args.policy, e.policy, || Policy::Both);
    let capture_radius = p.pick("engagement.capture_radius", args.capture_radius, e.capture_radius, || {
        world.default_capture_radius()
    });
    let horizon = p.pick("engagement.horizon", args.horizon, e.horizon, || world.default_horizon());
    let reassign_interval = p.pick("engagement.reassign_interval", args.reassign_interval, e.reassign_interval, || 0.1);
    let metric_exponent = p.pick("engagement.metric_exponent", args.metric_exponent, e.metric_exponent, || 1.0);
    let d = OdeConfig::default();
    let integrator = OdeConfig {
        rel_tol: p.pick("engagement.rel_tol", None, e.rel_tol, || d.rel_tol),
        abs_tol: p.pick("engagement.abs_tol", None, e.abs_tol, || d.abs_tol),
        max_step: p.pick("engagement.max_step", None, e.max_step, || d.max_step),
        output_dt: p.pick("engagement.output_dt", None, e.output_dt, || d.output_dt),
        initial_step: None,
    };
    let emit: BTreeSet<Emit> = p
        .pick("output.emit", None, file.output.emit, || {
            vec![Emit::Trace, Emit::Summary, Emit::Histogram, Emit::CumulativeCost]
        })
        .into_iter()
        .collect();
    if emit.is_empty() {
        return Err(CliError::Config("output.emit: must name at least one artifact kind".into()));
    }
    let output_dir = p.pick("output.dir", args.output_dir.clone(), file.output.dir, || PathBuf::from("out"));
    let sweep = sweep.map(|(sizes, runs)| SweepConfig {
        sizes: p.pick("sweep.sizes", sizes, file.sweep.sizes, || vec![5, 10, 20]),
        runs: p.pick("sweep.runs", runs, file.sweep.runs, || 100),
        histogram_bins: p.pick("sweep.histogram_bins", None, file.sweep.histogram_bins, || 20),
    });
    let resolved = Resolved {
        world,
        n,
        seed,
        policy,
        state_weight,
        control_weight,
        capture_radius,
        horizon,
        reassign_interval,
        metric_exponent,
        integrator,
        emit,
        sweep,
        defaulted: p.defaulted,
    };
    resolved.validate()?;
    if args.jobs == Some(0) {
        return Err(CliError::Config("jobs: must be at least 1".into()));
    }
    Ok(Setup {
        resolved,
        output_dir,
        jobs: args.jobs,
    })
}

impl Resolved {
    pub fn spec(&self, n: usize) -> ScenarioSpec {
        ScenarioSpec {
            state_weight: self.state_weight.clone(),
            control_weight: self.control_weight.clone(),
            ..ScenarioSpec::benchmark(self.world, n, self.seed)
        }
    }

    pub fn settings(&self, runs: usize, bins: usize) -> MonteCarloSettings {
        MonteCarloSettings {
            runs,
            capture_radius: self.capture_radius,
            horizon: self.horizon,
            reassign_interval: self.reassign_interval,
            metric_exponent: self.metric_exponent,
            integrator: self.integrator,
            histogram_bins: bins,
            execution: Execution::Parallel,
        }
    }

    fn validate(&self) -> Result<(), CliError> {
        let named = |section: &str, e: dotswarm::Error| match e {
            dotswarm::Error::InvalidParameter { name, reason } => CliError::Config(format!("{section}.{name}: {reason}")),
            other => CliError::Config(format!("{section}: {other}")),
        };
        self.spec(self.n).validate().map_err(|e| named("scenario", e))?;
        let runs = self.sweep.as_ref().map_or(1, |s| s.runs);
        let bins = self.sweep.as_ref().map_or(1, |s| s.histogram_bins);
        self.settings(runs, bins).validate().map_err(|e| {
            let section = match &e {
                dotswarm::Error::InvalidParameter { name, .. } if ["runs", "histogram_bins"].contains(name) => "sweep",
                _ => "engagement",
            };
            named(section, e)
        })?;
        if let Some(s) = &self.sweep {
            if s.sizes.is_empty() || s.sizes.contains(&0) {
                return Err(CliError::Config("sweep.sizes: must be a non-empty list of positive sizes".into()));
            }
        }
        Ok(())
    }
}
