use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::generate::{generate, Scenario, ScenarioSpec, World};
use super::rng::derive_seed;
use crate::dynamics::OdeConfig;
use crate::engine::{run_dynamics_policy, run_emd_policy, EngagementConfig, TerminalStatus};
use crate::error::{Error, Result};
use crate::parallel::Execution;
use crate::riccati_lqt::PolicyCache;
use crate::transport::Metric;

/// Aggregates over fewer successful runs than this fraction are unreliable.
pub const RELIABLE_SUCCESS_RATE: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSettings {
    pub runs: usize,
    pub capture_radius: f64,
    pub horizon: f64,
    pub reassign_interval: f64,
    pub metric_exponent: f64,
    pub integrator: OdeConfig,
    pub histogram_bins: usize,
    #[serde(skip)]
    pub execution: Execution,
}

impl MonteCarloSettings {
    /// Engine defaults of `world`.
    pub fn for_world(world: World, runs: usize) -> Self {
        Self {
            runs,
            capture_radius: world.default_capture_radius(),
            horizon: world.default_horizon(),
            reassign_interval: 0.1,
            metric_exponent: 1.0,
            integrator: OdeConfig::default(),
            histogram_bins: 20,
            execution: Execution::default(),
        }
    }

    pub fn engagement_config(&self, metric: Metric) -> EngagementConfig {
        EngagementConfig {
            capture_radius: self.capture_radius,
            horizon: self.horizon,
            reassign_interval: self.reassign_interval,
            integrator: self.integrator,
            metric,
            execution: self.execution,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::InvalidParameter {
                name: "runs",
                reason: "must be at least 1".into(),
            });
        }
        if self.histogram_bins == 0 {
            return Err(Error::InvalidParameter {
                name: "histogram_bins",
                reason: "must be at least 1".into(),
            });
        }
        self.engagement_config(Metric::Dynamics).validate()?;
        self.engagement_config(Metric::Euclidean {
            exponent: self.metric_exponent,
        })
        .validate()
    }
}

/// Outcome of both policies on one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedRun {
    pub j_dyn: f64,
    pub j_emd: f64,
    /// `J_emd − J_dyn`
    pub gap: f64,
    /// `Σ_i c_dyn(x_i(0), y_σ(i)(0))` of the initial dynamics assignment.
    pub c_dyn: f64,
    pub emd_switches: usize,
    pub emd_solves: usize,
    pub dyn_solves: usize,
    pub dyn_history_len: usize,
    pub dyn_status: TerminalStatus,
    pub emd_status: TerminalStatus,
}

impl PairedRun {
    pub fn all_captured(&self) -> bool {
        matches!(self.dyn_status, TerminalStatus::AllCaptured { .. })
            && matches!(self.emd_status, TerminalStatus::AllCaptured { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: usize,
    pub seed: u64,
    pub paired: Option<PairedRun>,
    /// Why the run was excluded from the aggregates.
    pub failure: Option<String>,
}

/// Wall-clock seconds of each policy. Kept apart from the report so the
/// report stays reproducible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunTiming {
    pub run: usize,
    pub dyn_seconds: f64,
    pub emd_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub requested: usize,
    pub completed: usize,
    pub failed: usize,
    pub success_rate: f64,
    /// False when fewer than 95% of the runs succeeded.
    pub reliable: bool,
    pub mean_gap: Option<f64>,
    /// Sample standard deviation (`n − 1`); zero for a single run.
    pub std_gap: Option<f64>,
    pub mean_j_dyn: Option<f64>,
    pub mean_j_emd: Option<f64>,
    pub mean_emd_switches: Option<f64>,
}

impl Aggregates {
    /// Statistics over the successful rows, accumulated in row order.
    pub fn from_records(records: &[RunRecord]) -> Self {
        let ok: Vec<&PairedRun> = records.iter().filter_map(|r| r.paired.as_ref()).collect();
        let requested = records.len();
        let completed = ok.len();
        let success_rate = if requested == 0 {
            0.0
        } else {
            completed as f64 / requested as f64
        };
        let mean = |f: &dyn Fn(&PairedRun) -> f64| -> Option<f64> {
            (completed > 0).then(|| ok.iter().map(|r| f(r)).sum::<f64>() / completed as f64)
        };
        let mean_gap = mean(&|r| r.gap);
        let std_gap = mean_gap.map(|m| {
            if completed < 2 {
                0.0
            } else {
                (ok.iter().map(|r| (r.gap - m) * (r.gap - m)).sum::<f64>() / (completed - 1) as f64).sqrt()
            }
        });
        Self {
            requested,
            completed,
            failed: requested - completed,
            success_rate,
            reliable: success_rate >= RELIABLE_SUCCESS_RATE,
            mean_gap,
            std_gap,
            mean_j_dyn: mean(&|r| r.j_dyn),
            mean_j_emd: mean(&|r| r.j_emd),
            mean_emd_switches: mean(&|r| r.emd_switches as f64),
        }
    }
}

/// `counts[b]` holds values in `[edges[b], edges[b+1])`; the last bin is
/// closed on the right.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    /// Equal-width bins spanning the data. A constant sample gets a unit-wide
    /// bin range centered on it.
    pub fn of(values: &[f64], bins: usize) -> Self {
        if values.is_empty() || bins == 0 {
            return Self {
                edges: Vec::new(),
                counts: Vec::new(),
            };
        }
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
        let width = (hi - lo) / bins as f64;
        let mut edges: Vec<f64> = (0..bins).map(|b| lo + b as f64 * width).collect();
        edges.push(hi);
        let mut counts = vec![0; bins];
        for &v in values {
            let b = (((v - lo) / width).floor() as usize).min(bins - 1);
            // guard against rounding across an edge
            let b = if v < edges[b] { b - 1 } else if b + 1 < bins && v >= edges[b + 1] { b + 1 } else { b };
            counts[b] += 1;
        }
        Self { edges, counts }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub spec: ScenarioSpec,
    pub settings: MonteCarloSettings,
    pub runs: Vec<RunRecord>,
    pub aggregates: Aggregates,
    /// Histogram of `J_emd − J_dyn` over successful runs.
    pub histogram: Histogram,
    #[serde(skip)]
    pub timings: Vec<RunTiming>,
}

/// Runs both policies on one scenario with a shared tracker cache.
pub fn run_pair(scenario: &Scenario, settings: &MonteCarloSettings) -> Result<(PairedRun, RunTiming)> {
    let cache = PolicyCache::new();
    let started = Instant::now();
    let dyn_trace = run_dynamics_policy(&scenario.engagement, &settings.engagement_config(Metric::Dynamics), &cache)?;
    let dyn_seconds = started.elapsed().as_secs_f64();
    let started = Instant::now();
    let emd_config = settings.engagement_config(Metric::Euclidean {
        exponent: settings.metric_exponent,
    });
    let emd_trace = run_emd_policy(&scenario.engagement, &emd_config, &cache)?;
    let emd_seconds = started.elapsed().as_secs_f64();
    if dyn_trace.invalid_assignment || emd_trace.invalid_assignment {
        return Err(Error::Infeasible("assignment used a pair whose tracker synthesis failed".into()));
    }
    let (j_dyn, j_emd) = (dyn_trace.total_cost(), emd_trace.total_cost());
    Ok((
        PairedRun {
            j_dyn,
            j_emd,
            gap: j_emd - j_dyn,
            c_dyn: dyn_trace.initial_assignment_cost,
            emd_switches: emd_trace.total_switches(),
            emd_solves: emd_trace.assignment_solves,
            dyn_solves: dyn_trace.assignment_solves,
            dyn_history_len: dyn_trace.assignment_history.len(),
            dyn_status: dyn_trace.status,
            emd_status: emd_trace.status,
        },
        RunTiming {
            run: 0,
            dyn_seconds,
            emd_seconds,
        },
    ))
}

/// Paired Monte Carlo: run `k` uses scenario seed `derive_seed(spec.seed, k)`.
/// Runs execute under `settings.execution`; the report is assembled in run
/// order.
pub fn monte_carlo(spec: &ScenarioSpec, settings: &MonteCarloSettings) -> Result<MonteCarloReport> {
    spec.validate()?;
    settings.validate()?;
    let outcomes = settings.execution.map_range(settings.runs, |k| {
        let seed = derive_seed(spec.seed, k as u64);
        let run_spec = ScenarioSpec { seed, ..spec.clone() };
        let result = generate(&run_spec).and_then(|s| run_pair(&s, settings));
        (k, seed, result)
    });
    let mut runs = Vec::with_capacity(outcomes.len());
    let mut timings = Vec::new();
    for (run, seed, result) in outcomes {
        match result {
            Ok((paired, timing)) => {
                timings.push(RunTiming { run, ..timing });
                runs.push(RunRecord {
                    run,
                    seed,
                    paired: Some(paired),
                    failure: None,
                });
            }
            Err(e) => runs.push(RunRecord {
                run,
                seed,
                paired: None,
                failure: Some(e.to_string()),
            }),
        }
    }
    let aggregates = Aggregates::from_records(&runs);
    let gaps: Vec<f64> = runs.iter().filter_map(|r| r.paired.as_ref().map(|p| p.gap)).collect();
    Ok(MonteCarloReport {
        spec: spec.clone(),
        settings: *settings,
        histogram: Histogram::of(&gaps, settings.histogram_bins),
        aggregates,
        runs,
        timings,
    })
}

impl MonteCarloReport {
    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }

    /// One row per run: `run, seed, status, j_dyn, j_emd, gap, c_dyn,
    /// emd_switches, emd_solves, dyn_solves, dyn_history_len,
    /// all_captured, failure`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "run",
            "seed",
            "status",
            "j_dyn",
            "j_emd",
            "gap",
            "c_dyn",
            "emd_switches",
            "emd_solves",
            "dyn_solves",
            "dyn_history_len",
            "all_captured",
            "failure",
        ])?;
        for r in &self.runs {
            let mut row = vec![r.run.to_string(), r.seed.to_string()];
            match &r.paired {
                Some(p) => row.extend([
                    "ok".to_string(),
                    format!("{:?}", p.j_dyn),
                    format!("{:?}", p.j_emd),
                    format!("{:?}", p.gap),
                    format!("{:?}", p.c_dyn),
                    p.emd_switches.to_string(),
                    p.emd_solves.to_string(),
                    p.dyn_solves.to_string(),
                    p.dyn_history_len.to_string(),
                    u8::from(p.all_captured()).to_string(),
                    String::new(),
                ]),
                None => {
                    row.push("failed".into());
                    row.extend(std::iter::repeat_n(String::new(), 9));
                    row.push(r.failure.clone().unwrap_or_default());
                }
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// `run, dyn_seconds, emd_seconds`; not reproducible by nature.
    pub fn write_timings_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["run", "dyn_seconds", "emd_seconds"])?;
        for t in &self.timings {
            w.write_record([t.run.to_string(), format!("{:?}", t.dyn_seconds), format!("{:?}", t.emd_seconds)])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(run: usize, gap: Option<f64>) -> RunRecord {
        RunRecord {
            run,
            seed: run as u64,
            paired: gap.map(|g| PairedRun {
                j_dyn: 1.0,
                j_emd: 1.0 + g,
                gap: g,
                c_dyn: 1.0,
                emd_switches: run,
                emd_solves: 1,
                dyn_solves: 1,
                dyn_history_len: 1,
                dyn_status: TerminalStatus::AllCaptured { time: 1.0 },
                emd_status: TerminalStatus::AllCaptured { time: 1.0 },
            }),
            failure: gap.is_none().then(|| "boom".into()),
        }
    }

    #[test]
    fn aggregates_skip_failures_and_flag_reliability() {
        let rows = vec![row(0, Some(1.0)), row(1, Some(3.0)), row(2, None)];
        let a = Aggregates::from_records(&rows);
        assert_eq!((a.requested, a.completed, a.failed), (3, 2, 1));
        assert_eq!(a.mean_gap, Some(2.0));
        assert_eq!(a.std_gap, Some(2f64.sqrt()));
        assert_eq!(a.mean_emd_switches, Some(0.5));
        assert!(!a.reliable);
        let none = Aggregates::from_records(&[row(0, None)]);
        assert_eq!(none.mean_gap, None);
    }

    #[test]
    fn histogram_counts_every_value() {
        let v = [0.0, 0.1, 0.5, 0.99, 1.0];
        let h = Histogram::of(&v, 4);
        assert_eq!(h.edges, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(h.counts, vec![2, 0, 1, 2]);
        let c = Histogram::of(&[3.0, 3.0], 2);
        assert_eq!(c.counts.iter().sum::<usize>(), 2);
        assert_eq!(c.edges.first(), Some(&2.5));
    }

    #[test]
    fn zero_runs_are_rejected() {
        let spec = ScenarioSpec::benchmark(World::DoubleIntegrator, 2, 1);
        let settings = MonteCarloSettings::for_world(World::DoubleIntegrator, 0);
        assert!(matches!(monte_carlo(&spec, &settings), Err(Error::InvalidParameter { name: "runs", .. })));
    }
}
