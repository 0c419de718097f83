use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::transport::Metric;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSample {
    pub state: Vec<f64>,
    pub control: Vec<f64>,
    /// Stage cost with steady-state terms removed; zero once inactive.
    pub stage_cost: f64,
    pub cumulative_cost: f64,
    pub assigned_target: Option<usize>,
    pub active: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSample {
    pub state: Vec<f64>,
    pub active: bool,
}

/// `σ` in force from `time` on; `None` for agents no longer active.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentRecord {
    pub time: f64,
    pub sigma: Vec<Option<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TerminalStatus {
    /// Every pair was captured; `time` is the last capture.
    AllCaptured { time: f64 },
    /// The horizon ended with pairs still active.
    HorizonExceeded { active_pairs: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationTrace {
    pub metric: Metric,
    /// Output grid; every agent and target series has one sample per entry.
    pub times: Vec<f64>,
    pub agents: Vec<Vec<AgentSample>>,
    pub targets: Vec<Vec<TargetSample>>,
    pub assignment_history: Vec<AssignmentRecord>,
    pub switch_counts: Vec<usize>,
    pub exit_times: Vec<Option<f64>>,
    pub status: TerminalStatus,
    /// Number of assignment problems solved.
    pub assignment_solves: usize,
    /// `Σ_i c(x_i(0), y_σ(i)(0))` under the run's metric.
    pub initial_assignment_cost: f64,
    /// True if any assignment used a pair whose tracker failed.
    pub invalid_assignment: bool,
    /// Smallest distance between two active agents over the grid.
    pub min_inter_agent_distance: Option<f64>,
}

impl SimulationTrace {
    /// `J = Σ_i ∫ g_i dt` at the end of the run.
    pub fn total_cost(&self) -> f64 {
        self.agents
            .iter()
            .map(|s| s.last().map_or(0.0, |x| x.cumulative_cost))
            .sum()
    }

    /// System cumulative cost `Σ_i J_i(t)` on the grid.
    pub fn cumulative_cost_series(&self) -> Vec<f64> {
        (0..self.times.len())
            .map(|k| self.agents.iter().map(|s| s[k].cumulative_cost).sum())
            .collect()
    }

    pub fn total_switches(&self) -> usize {
        self.switch_counts.iter().sum()
    }

    /// Writes one row per (time, agent):
    /// `time, agent_id, <state labels>, u_0.., instantaneous_cost,
    /// cumulative_cost, assigned_target, active_flag`.
    pub fn write_agent_csv<W: Write>(&self, state_labels: &[String], out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let du = self.agents.first().and_then(|s| s.first()).map_or(0, |s| s.control.len());
        let mut header = vec!["time".to_string(), "agent_id".to_string()];
        header.extend(state_labels.iter().cloned());
        header.extend((0..du).map(|k| format!("u_{k}")));
        header.extend(
            ["instantaneous_cost", "cumulative_cost", "assigned_target", "active_flag"]
                .iter()
                .map(|s| s.to_string()),
        );
        w.write_record(&header)?;
        for (k, t) in self.times.iter().enumerate() {
            for (i, series) in self.agents.iter().enumerate() {
                let s = &series[k];
                let mut row = vec![fmt(*t), i.to_string()];
                row.extend(s.state.iter().map(|v| fmt(*v)));
                row.extend(s.control.iter().map(|v| fmt(*v)));
                row.push(fmt(s.stage_cost));
                row.push(fmt(s.cumulative_cost));
                row.push(s.assigned_target.map_or(String::new(), |j| j.to_string()));
                row.push(u8::from(s.active).to_string());
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Writes one row per (time, target): `time, target_id, <state labels>,
    /// active_flag`.
    pub fn write_target_csv<W: Write>(&self, state_labels: &[String], out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["time".to_string(), "target_id".to_string()];
        header.extend(state_labels.iter().cloned());
        header.push("active_flag".into());
        w.write_record(&header)?;
        for (k, t) in self.times.iter().enumerate() {
            for (j, series) in self.targets.iter().enumerate() {
                let s = &series[k];
                let mut row = vec![fmt(*t), j.to_string()];
                row.extend(s.state.iter().map(|v| fmt(*v)));
                row.push(u8::from(s.active).to_string());
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Run summary without the sampled series.
    pub fn summary(&self) -> TraceSummary {
        TraceSummary {
            metric: self.metric,
            total_cost: self.total_cost(),
            initial_assignment_cost: self.initial_assignment_cost,
            assignment_history: self.assignment_history.clone(),
            switch_counts: self.switch_counts.clone(),
            exit_times: self.exit_times.clone(),
            status: self.status.clone(),
            assignment_solves: self.assignment_solves,
            invalid_assignment: self.invalid_assignment,
            min_inter_agent_distance: self.min_inter_agent_distance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub metric: Metric,
    pub total_cost: f64,
    pub initial_assignment_cost: f64,
    pub assignment_history: Vec<AssignmentRecord>,
    pub switch_counts: Vec<usize>,
    pub exit_times: Vec<Option<f64>>,
    pub status: TerminalStatus,
    pub assignment_solves: usize,
    pub invalid_assignment: bool,
    pub min_inter_agent_distance: Option<f64>,
}

/// Shortest representation that round-trips.
fn fmt(v: f64) -> String {
    format!("{v:?}")
}
