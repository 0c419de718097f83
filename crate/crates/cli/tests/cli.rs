use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn dotswarm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dotswarm")).args(args).output().unwrap()
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
        })
        .collect();
    out.sort();
    out
}

#[test]
fn run_both_policies_writes_parseable_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("out");
    let o = dotswarm(&["run", "--world", "double-integrator", "--n", "5", "--seed", "7", "--policy", "both", "--output-dir", dir.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for name in ["dyn_agents.csv", "emd_agents.csv", "dyn_trace.json", "emd_trace.json", "cumulative_cost.csv", "summary.json"] {
        assert!(dir.join(name).exists(), "{name}");
    }
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["status"], "ok");
    assert_eq!(summary["config"]["seed"], 7);
    assert!(summary["config"]["defaulted"].as_array().unwrap().iter().any(|f| f == "engagement.horizon"));
    let series = fs::read_to_string(dir.join("cumulative_cost.csv")).unwrap();
    assert!(series.starts_with("time,dyn,emd\n"));
    let last: Vec<f64> = series.lines().last().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    // the dynamics curve settles at the optimum
    assert!((last[1] - 1.0).abs() < 0.02 && last[2] > last[1]);
    let agents = fs::read_to_string(dir.join("dyn_agents.csv")).unwrap();
    let header = agents.lines().next().unwrap();
    assert_eq!(
        header,
        "time,agent_id,position_0,position_1,position_2,velocity_0,velocity_1,velocity_2,u_0,u_1,u_2,instantaneous_cost,cumulative_cost,assigned_target,active_flag"
    );
}

#[test]
fn single_pair_run() {
    let tmp = tempfile::tempdir().unwrap();
    let o = dotswarm(&["run", "--n", "1", "--output-dir", tmp.path().to_str().unwrap(), "--json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["policies"][0]["assignment_history"][0]["sigma"], serde_json::json!([0]));
}

#[test]
fn config_errors_exit_1_without_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("out");
    let d = dir.to_str().unwrap();
    let missing = dotswarm(&["run", "--config", "/no/such/file.toml", "--output-dir", d]);
    assert_eq!(missing.status.code(), Some(1));
    let zero_runs = dotswarm(&["sweep", "--runs", "0", "--output-dir", d]);
    assert_eq!(zero_runs.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&zero_runs.stderr).contains("sweep.runs"));
    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, "[engagement]\ncapture_radius = -1.0\n").unwrap();
    let o = dotswarm(&["run", "--config", bad.to_str().unwrap(), "--output-dir", d]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("engagement.capture_radius"));
    let unknown = tmp.path().join("unknown.toml");
    fs::write(&unknown, "[scenario]\nsize = 3\n").unwrap();
    assert_eq!(dotswarm(&["run", "--config", unknown.to_str().unwrap(), "--output-dir", d]).status.code(), Some(1));
    assert!(!dir.exists());
}

#[test]
fn flags_override_the_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.toml");
    fs::write(&cfg, "[scenario]\nworld = \"quadcopter\"\nn = 3\nseed = 5\n\n[engagement]\nhorizon = 4.0\npolicy = \"dyn\"\n").unwrap();
    let dir = tmp.path().join("out");
    let o = dotswarm(&["run", "--config", cfg.to_str().unwrap(), "--seed", "6", "--output-dir", dir.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s: serde_json::Value = serde_json::from_slice(&fs::read(dir.join("summary.json")).unwrap()).unwrap();
    let c = &s["config"];
    assert_eq!((c["world"].as_str(), c["n"].as_u64(), c["seed"].as_u64()), (Some("quadcopter"), Some(3), Some(6)));
    assert_eq!(c["horizon"], 4.0);
    assert!(!dir.join("emd_trace.json").exists());
    let defaulted: Vec<&str> = c["defaulted"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert!(defaulted.contains(&"engagement.capture_radius") && !defaulted.contains(&"scenario.seed"));
}

#[test]
fn reruns_are_bit_exact_across_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for (dir, jobs) in [(&a, "1"), (&b, "3")] {
        let d = dir.to_str().unwrap();
        assert!(dotswarm(&["run", "--n", "4", "--seed", "3", "--jobs", jobs, "--output-dir", d]).status.success());
        assert!(dotswarm(&["sweep", "--sizes", "2,3", "--runs", "4", "--seed", "3", "--jobs", jobs, "--output-dir", d]).status.success());
    }
    assert_eq!(files(&a), files(&b));
}

#[test]
fn minimal_sweep_emits_reports_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let o = dotswarm(&["sweep", "--sizes", "2", "--runs", "3", "--output-dir", tmp.path().to_str().unwrap()]);
    assert!(o.status.success());
    let names: Vec<String> = files(tmp.path()).into_iter().map(|(n, _)| n).collect();
    assert_eq!(names, ["histogram_n2.csv", "sweep_n2.csv", "sweep_n2.json", "sweep_summary.csv", "sweep_summary.json"]);
    let report: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join("sweep_n2.json")).unwrap()).unwrap();
    assert_eq!(report["report"]["runs"].as_array().unwrap().len(), 3);
}

#[test]
fn verify_passes_and_reports_injected_faults() {
    let ok = dotswarm(&["verify", "--json"]);
    assert_eq!(ok.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&ok.stdout).unwrap();
    assert_eq!(v["passed"], true);
    let bad = dotswarm(&["verify", "--inject-fault", "care-residual"]);
    assert_eq!(bad.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("care_residual"));
    assert!(String::from_utf8_lossy(&bad.stdout).contains("FAIL"));
}
