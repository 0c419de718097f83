use std::collections::BTreeMap;

use dotswarm::engine::{assign, run_engagement, SimulationTrace, TraceSummary};
use dotswarm::riccati_lqt::PolicyCache;
use dotswarm::scenarios::{generate, monte_carlo, Aggregates, MonteCarloReport};
use dotswarm::transport::Metric;
use dotswarm::verify::{run_suite, Fault, OracleResult};
use dotswarm::Execution;
use serde::Serialize;
use serde_json::json;

use crate::config::{resolve, CommonArgs, Emit, Policy, Resolved};
use crate::output::{csv_bytes, Artifacts};
use crate::CliError;

fn in_pool<T: Send>(jobs: Option<usize>, work: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    match jobs {
        None => Ok(work()),
        Some(j) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(j)
                .build()
                .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?;
            Ok(pool.install(work))
        }
    }
}

fn runtime(e: dotswarm::Error) -> CliError {
    CliError::Runtime(e.to_string())
}

#[derive(Serialize)]
struct PolicySummary<'a> {
    policy: &'a str,
    /// Total cost divided by `Σ c_dyn` of the initial dynamics assignment.
    normalized_cost: f64,
    switches: usize,
    #[serde(flatten)]
    summary: TraceSummary,
}

pub fn run(args: &CommonArgs) -> Result<(), CliError> {
    let setup = resolve(args, None)?;
    let cfg = &setup.resolved;
    let outcome = in_pool(setup.jobs, || simulate(cfg))?;
    let mut artifacts = Artifacts::default();
    match outcome {
        Ok((traces, c_dyn)) => {
            let labels = cfg.spec(cfg.n).model().map_err(runtime)?.layout.labels();
            let mut policies = Vec::new();
            for (name, trace) in &traces {
                if cfg.emit.contains(&Emit::Trace) {
                    artifacts.add(format!("{name}_agents.csv"), csv_bytes(|b| trace.write_agent_csv(&labels, b))?);
                    artifacts.add(format!("{name}_targets.csv"), csv_bytes(|b| trace.write_target_csv(&labels, b))?);
                    artifacts.add_json(
                        format!("{name}_trace.json"),
                        &json!({ "config": cfg, "seed": cfg.seed, "policy": name, "trace": trace.summary() }),
                    )?;
                }
                policies.push(PolicySummary {
                    policy: name,
                    normalized_cost: trace.total_cost() / c_dyn,
                    switches: trace.total_switches(),
                    summary: trace.summary(),
                });
            }
            if cfg.emit.contains(&Emit::CumulativeCost) {
                artifacts.add("cumulative_cost.csv", cumulative_cost_csv(&traces, c_dyn)?);
            }
            let summary = json!({ "status": "ok", "config": cfg, "c_dyn": c_dyn, "policies": policies });
            if cfg.emit.contains(&Emit::Summary) {
                artifacts.add_json("summary.json", &summary)?;
            }
            artifacts.write_to(&setup.output_dir)?;
            if args.json {
                println!("{}", serde_json::to_string_pretty(&summary).expect("serializable"));
            } else {
                println!("{} {}v{} seed {}", cfg.world.name(), cfg.n, cfg.n, cfg.seed);
                println!("sum of initial dynamics costs: {c_dyn:.6e}");
                for p in &policies {
                    println!(
                        "{:>4}: J = {:.6e} ({:.4}x), solves {}, switches {}, {:?}",
                        p.policy,
                        p.summary.total_cost,
                        p.normalized_cost,
                        p.summary.assignment_solves,
                        p.switches,
                        p.summary.status
                    );
                }
                print_defaults(cfg);
                print_written(&artifacts, &setup.output_dir);
            }
            Ok(())
        }
        Err(e) => {
            let reason = e.to_string();
            artifacts.add_json("summary.json", &json!({ "status": "failed", "reason": reason, "config": cfg }))?;
            artifacts.write_to(&setup.output_dir)?;
            Err(CliError::Runtime(reason))
        }
    }
}

type Traces = Vec<(&'static str, SimulationTrace)>;

fn simulate(cfg: &Resolved) -> dotswarm::Result<(Traces, f64)> {
    let scenario = generate(&cfg.spec(cfg.n))?;
    let settings = cfg.settings(1, 1);
    let cache = PolicyCache::new();
    let mut traces = Vec::new();
    if cfg.policy != Policy::Emd {
        traces.push(("dyn", run_engagement(&scenario.engagement, &settings.engagement_config(Metric::Dynamics), &cache)?));
    }
    if cfg.policy != Policy::Dyn {
        let metric = Metric::Euclidean {
            exponent: cfg.metric_exponent,
        };
        traces.push(("emd", run_engagement(&scenario.engagement, &settings.engagement_config(metric), &cache)?));
    }
    let c_dyn = match traces.first() {
        Some(("dyn", t)) => t.initial_assignment_cost,
        _ => {
            let e = &scenario.engagement;
            assign(e, &e.initial, Metric::Dynamics, &cache, Execution::Parallel)?.cost
        }
    };
    Ok((traces, c_dyn))
}

/// `time, <policy>...`: each policy's `Σ_i J_i(t) / Σ c_dyn`, held at its
/// final value past the end of its run.
fn cumulative_cost_csv(traces: &Traces, c_dyn: f64) -> Result<Vec<u8>, CliError> {
    let series: Vec<Vec<f64>> = traces.iter().map(|(_, t)| t.cumulative_cost_series()).collect();
    let longest = traces
        .iter()
        .max_by_key(|(_, t)| t.times.len())
        .map(|(_, t)| t.times.clone())
        .unwrap_or_default();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["time".to_string()];
    header.extend(traces.iter().map(|(n, _)| n.to_string()));
    let err = |e: csv::Error| CliError::Runtime(e.to_string());
    w.write_record(&header).map_err(err)?;
    for (k, t) in longest.iter().enumerate() {
        let mut row = vec![format!("{t:?}")];
        for s in &series {
            let v = s.get(k).or(s.last()).copied().unwrap_or(0.0);
            row.push(format!("{:?}", v / c_dyn));
        }
        w.write_record(&row).map_err(err)?;
    }
    w.into_inner().map_err(|e| CliError::Runtime(e.to_string()))
}

#[derive(Serialize)]
struct SizeRow {
    n: usize,
    #[serde(flatten)]
    aggregates: Aggregates,
    max_dyn_history_len: usize,
}

pub fn sweep(args: &CommonArgs, sizes: Option<Vec<usize>>, runs: Option<usize>, timings: bool) -> Result<(), CliError> {
    let setup = resolve(args, Some((sizes, runs)))?;
    let cfg = &setup.resolved;
    let sw = cfg.sweep.clone().expect("sweep settings resolved");
    let reports: Vec<MonteCarloReport> = in_pool(setup.jobs, || {
        sw.sizes
            .iter()
            .map(|&n| monte_carlo(&cfg.spec(n), &cfg.settings(sw.runs, sw.histogram_bins)))
            .collect::<dotswarm::Result<Vec<_>>>()
    })?
    .map_err(runtime)?;

    let mut artifacts = Artifacts::default();
    let mut rows = Vec::new();
    for (report, &n) in reports.iter().zip(&sw.sizes) {
        if cfg.emit.contains(&Emit::Summary) {
            artifacts.add_json(format!("sweep_n{n}.json"), &json!({ "config": cfg, "n": n, "report": report }))?;
            artifacts.add(format!("sweep_n{n}.csv"), csv_bytes(|b| report.write_csv(b))?);
        }
        if cfg.emit.contains(&Emit::Histogram) {
            artifacts.add(format!("histogram_n{n}.csv"), histogram_csv(report)?);
        }
        if timings {
            artifacts.add(format!("timings_n{n}.csv"), csv_bytes(|b| report.write_timings_csv(b))?);
        }
        rows.push(SizeRow {
            n,
            aggregates: report.aggregates.clone(),
            max_dyn_history_len: report
                .runs
                .iter()
                .filter_map(|r| r.paired.as_ref().map(|p| p.dyn_history_len))
                .max()
                .unwrap_or(0),
        });
    }
    let summary = json!({ "status": "ok", "config": cfg, "sizes": rows });
    artifacts.add_json("sweep_summary.json", &summary)?;
    artifacts.add("sweep_summary.csv", summary_csv(&rows)?);
    artifacts.write_to(&setup.output_dir)?;

    if args.json {
        println!("{}", serde_json::to_string_pretty(&summary).expect("serializable"));
    } else {
        println!("{:>5} {:>5} {:>10} {:>14} {:>14} {:>10}", "n", "runs", "completed", "mean gap", "std gap", "switches");
        for r in &rows {
            let a = &r.aggregates;
            println!(
                "{:>5} {:>5} {:>10} {:>14} {:>14} {:>10}{}",
                r.n,
                a.requested,
                a.completed,
                opt(a.mean_gap, "e"),
                opt(a.std_gap, "e"),
                opt(a.mean_emd_switches, "f"),
                if a.reliable { "" } else { "  (unreliable)" }
            );
        }
        print_defaults(cfg);
        print_written(&artifacts, &setup.output_dir);
    }
    Ok(())
}

fn opt(v: Option<f64>, style: &str) -> String {
    match (v, style) {
        (None, _) => "-".into(),
        (Some(x), "e") => format!("{x:.4e}"),
        (Some(x), _) => format!("{x:.2}"),
    }
}

fn histogram_csv(report: &MonteCarloReport) -> Result<Vec<u8>, CliError> {
    let h = &report.histogram;
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Runtime(e.to_string());
    w.write_record(["bin_low", "bin_high", "count"]).map_err(err)?;
    for (b, c) in h.counts.iter().enumerate() {
        w.write_record([format!("{:?}", h.edges[b]), format!("{:?}", h.edges[b + 1]), c.to_string()])
            .map_err(err)?;
    }
    w.into_inner().map_err(|e| CliError::Runtime(e.to_string()))
}

fn summary_csv(rows: &[SizeRow]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Runtime(e.to_string());
    w.write_record([
        "n",
        "runs",
        "completed",
        "mean_gap",
        "std_gap",
        "mean_j_dyn",
        "mean_j_emd",
        "mean_emd_switches",
        "max_dyn_history_len",
        "reliable",
    ])
    .map_err(err)?;
    let f = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:?}"));
    for r in rows {
        let a = &r.aggregates;
        w.write_record([
            r.n.to_string(),
            a.requested.to_string(),
            a.completed.to_string(),
            f(a.mean_gap),
            f(a.std_gap),
            f(a.mean_j_dyn),
            f(a.mean_j_emd),
            f(a.mean_emd_switches),
            r.max_dyn_history_len.to_string(),
            u8::from(a.reliable).to_string(),
        ])
        .map_err(err)?;
    }
    w.into_inner().map_err(|e| CliError::Runtime(e.to_string()))
}

fn print_defaults(cfg: &Resolved) {
    if !cfg.defaulted.is_empty() {
        println!("defaulted: {}", cfg.defaulted.join(", "));
    }
}

fn print_written(artifacts: &Artifacts, dir: &std::path::Path) {
    println!("wrote {} to {}", artifacts.names().collect::<Vec<_>>().join(", "), dir.display());
}

pub fn verify(json: bool, jobs: Option<usize>, inject_fault: bool) -> Result<(), CliError> {
    if jobs == Some(0) {
        return Err(CliError::Config("jobs: must be at least 1".into()));
    }
    let fault = inject_fault.then_some(Fault::CareResidual);
    let results: Vec<OracleResult> = in_pool(jobs, || run_suite(fault))?;
    if json {
        let out: BTreeMap<&str, &OracleResult> = results.iter().map(|r| (r.name.as_str(), r)).collect();
        println!("{}", serde_json::to_string_pretty(&json!({ "passed": results.iter().all(|r| r.passed), "oracles": out })).expect("serializable"));
    } else {
        println!("{:<22} {:>6} {:>6} {:>12}  detail", "oracle", "result", "cases", "worst");
        for r in &results {
            println!(
                "{:<22} {:>6} {:>6} {:>12.4e}  {}",
                r.name,
                if r.passed { "pass" } else { "FAIL" },
                r.cases,
                r.worst,
                r.detail
            );
        }
    }
    let failed: Vec<String> = results.iter().filter(|r| !r.passed).map(|r| r.name.clone()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::OracleFailed(failed))
    }
}
