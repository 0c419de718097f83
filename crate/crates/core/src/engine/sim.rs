//! Engagement loop: assign, integrate every active pair up to the next
//! assignment instant (or capture), repeat.

use std::sync::Arc;

use nalgebra::DVector;

use super::pair::PairDynamics;
use super::state::{capture_check, Engagement, EngagementConfig, SwarmState};
use super::trace::{AgentSample, AssignmentRecord, SimulationTrace, TargetSample, TerminalStatus};
use crate::dynamics::{integrate_grid, Flow};
use crate::error::{Error, Result};
use crate::parallel::Execution;
use crate::riccati_lqt::{PolicyCache, TrackingPolicy};
use crate::transport::{dynamics_cost, euclidean_cost, solve_matching, CostMatrix, Metric, TargetRef};

/// Outcome of one assignment over the active pairs.
#[derive(Debug, Clone)]
pub struct Assignment {
    /// Target of each agent (`None` if inactive), indexed globally.
    pub sigma: Vec<Option<usize>>,
    /// Tracker for each assigned pair; `None` where synthesis failed.
    pub policies: Vec<Option<Arc<TrackingPolicy>>>,
    /// Cost matrix on the active agents (rows) and targets (columns).
    pub matrix: CostMatrix,
    /// `Σ` of the chosen entries.
    pub cost: f64,
    pub uses_failed_entry: bool,
}

/// Solves the assignment of the active agents onto the active targets under
/// `metric` and returns the trackers of the chosen pairs. Under the dynamics
/// metric they come straight from the cost construction.
pub fn assign(
    engagement: &Engagement,
    swarm: &SwarmState,
    metric: Metric,
    cache: &PolicyCache,
    execution: Execution,
) -> Result<Assignment> {
    let n = swarm.len();
    let agents: Vec<DVector<f64>> = swarm.active_agents.iter().map(|&i| swarm.agent_states[i].clone()).collect();
    let mut sigma = vec![None; n];
    let mut policies = vec![None; n];
    let (matrix, matching) = match metric {
        Metric::Dynamics => {
            let targets: Vec<TargetRef<'_>> = swarm
                .active_targets
                .iter()
                .map(|&j| TargetRef {
                    system: &engagement.target_systems[j],
                    state: &swarm.target_states[j],
                })
                .collect();
            let dc = dynamics_cost(
                &engagement.agent_model.system,
                &agents,
                &targets,
                &engagement.cost,
                &engagement.error_map,
                cache,
                execution,
            )?;
            let matching = solve_matching(&dc.matrix)?;
            for (r, &c) in matching.sigma.iter().enumerate() {
                let i = swarm.active_agents[r];
                policies[i] = dc.policy(r, c).ok();
            }
            (dc.matrix, matching)
        }
        Metric::Euclidean { exponent } => {
            let targets: Vec<DVector<f64>> = swarm.active_targets.iter().map(|&j| swarm.target_states[j].clone()).collect();
            let matrix = euclidean_cost(
                &agents,
                &engagement.agent_model.layout,
                &targets,
                &engagement.target_layout,
                exponent,
            )?;
            let matching = solve_matching(&matrix)?;
            for (r, &c) in matching.sigma.iter().enumerate() {
                let i = swarm.active_agents[r];
                let j = swarm.active_targets[c];
                policies[i] = cache
                    .tracker(
                        &engagement.agent_model.system,
                        &engagement.target_systems[j],
                        &engagement.cost,
                        &engagement.error_map,
                    )
                    .ok()
                    .map(Arc::new);
            }
            (matrix, matching)
        }
    };
    let mut uses_failed_entry = matching.uses_failed_entry;
    for (r, &c) in matching.sigma.iter().enumerate() {
        let i = swarm.active_agents[r];
        sigma[i] = Some(swarm.active_targets[c]);
        uses_failed_entry |= policies[i].is_none();
    }
    Ok(Assignment {
        sigma,
        policies,
        matrix,
        cost: matching.total,
        uses_failed_entry,
    })
}

struct Segment {
    /// `(grid index, joint state [x; y; J], control, stage cost)`
    samples: Vec<(usize, Vec<f64>, Vec<f64>, f64)>,
    final_state: Vec<f64>,
    captured_at: Option<usize>,
}

#[allow(clippy::too_many_arguments)]
fn integrate_pair(
    engagement: &Engagement,
    config: &EngagementConfig,
    policy: &TrackingPolicy,
    x: &DVector<f64>,
    y: &DVector<f64>,
    k0: usize,
    k1: usize,
    record_first: bool,
) -> Result<Segment> {
    let pd = PairDynamics::new(policy, y)?;
    let (dx, n) = (x.len(), pd.joint_dim());
    let mut z0 = Vec::with_capacity(n + 1);
    z0.extend_from_slice(x.as_slice());
    z0.extend_from_slice(y.as_slice());
    z0.push(0.0);

    let dt = config.integrator.output_dt;
    let t0 = engagement.initial.time + k0 as f64 * dt;
    let t1 = engagement.initial.time + k1 as f64 * dt;
    let mut samples = Vec::with_capacity(k1 - k0 + 1);
    let mut captured_at = None;
    let mut work = pd.work();
    let outcome = integrate_grid(
        |_, z, dz| pd.rhs(z, dz, &mut work),
        t0,
        &z0,
        t1,
        &config.integrator,
        |k, _, z| {
            let captured = capture_check(
                &z[..dx],
                &engagement.agent_model.layout,
                &z[dx..n],
                &engagement.target_layout,
                config.capture_radius,
            );
            if k > 0 || record_first {
                samples.push((k0 + k, z.to_vec(), pd.control(z).as_slice().to_vec(), pd.stage_cost(z)));
            }
            if captured {
                captured_at = Some(k0 + k);
                Flow::Stop
            } else {
                Flow::Continue
            }
        },
    )?;
    Ok(Segment {
        samples,
        final_state: outcome.state,
        captured_at,
    })
}

/// Runs the engagement under `config.metric`: the dynamics metric assigns
/// once at the start, the Euclidean metric reassigns every
/// `reassign_interval`.
pub fn run_engagement(engagement: &Engagement, config: &EngagementConfig, cache: &PolicyCache) -> Result<SimulationTrace> {
    engagement.validate()?;
    config.validate()?;
    let n = engagement.initial.len();
    let dx = engagement.agent_model.state_dim();
    let du = engagement.agent_model.input_dim();
    let dt = config.integrator.output_dt;
    let horizon_k = config.horizon_steps();
    let step_k = config.reassign_steps();
    let reassigns = matches!(config.metric, Metric::Euclidean { .. });

    let mut swarm = engagement.initial.clone();
    let mut agents: Vec<Vec<AgentSample>> = vec![Vec::new(); n];
    let mut targets: Vec<Vec<TargetSample>> = vec![Vec::new(); n];
    let mut cumulative = vec![0.0; n];
    let mut sigma: Vec<Option<usize>> = vec![None; n];
    let mut policies: Vec<Option<Arc<TrackingPolicy>>> = vec![None; n];
    let mut history = Vec::new();
    let mut switch_counts = vec![0usize; n];
    let mut exit_times = vec![None; n];
    let mut solves = 0usize;
    let mut invalid = false;
    let mut initial_cost = 0.0;

    let mut k0 = 0usize;
    while !swarm.active_agents.is_empty() && k0 < horizon_k {
        swarm.time = engagement.initial.time + k0 as f64 * dt;
        if k0 == 0 || reassigns {
            let a = assign(engagement, &swarm, config.metric, cache, config.execution)?;
            solves += 1;
            invalid |= a.uses_failed_entry;
            if k0 == 0 {
                initial_cost = a.cost;
            }
            let changed = a.sigma != sigma;
            for &i in &swarm.active_agents {
                if sigma[i].is_some() && sigma[i] != a.sigma[i] {
                    switch_counts[i] += 1;
                }
            }
            if k0 == 0 || changed {
                history.push(AssignmentRecord {
                    time: swarm.time,
                    sigma: a.sigma.clone(),
                });
            }
            sigma = a.sigma;
            policies = a.policies;
        }
        let k1 = (k0 + step_k).min(horizon_k);
        let active = swarm.active_agents.clone();
        let segments = config.execution.map_slice(&active, |&i| {
            let j = sigma[i].expect("active agents are assigned");
            let policy = policies[i].as_ref().ok_or_else(|| Error::PairSynthesis {
                agent: i,
                target: j,
                source: Box::new(Error::DegeneratePolicy("no tracker for the assigned pair".into())),
            })?;
            integrate_pair(
                engagement,
                config,
                policy,
                &swarm.agent_states[i],
                &swarm.target_states[j],
                k0,
                k1,
                k0 == 0,
            )
        });

        let mut captured = Vec::new();
        for (&i, seg) in active.iter().zip(segments) {
            let seg = seg?;
            let j = sigma[i].expect("active agents are assigned");
            for (k, z, u, g) in seg.samples {
                let is_capture = seg.captured_at == Some(k);
                agents[i].push(AgentSample {
                    state: z[..dx].to_vec(),
                    control: u,
                    stage_cost: g,
                    cumulative_cost: cumulative[i] + z[z.len() - 1],
                    assigned_target: Some(j),
                    active: !is_capture,
                });
                targets[j].push(TargetSample {
                    state: z[dx..z.len() - 1].to_vec(),
                    active: !is_capture,
                });
            }
            if seg.captured_at == Some(k0) && k0 > 0 {
                // captured at the segment start under a new pairing
                if let Some(last) = agents[i].last_mut() {
                    last.active = false;
                    last.assigned_target = Some(j);
                }
                if let Some(last) = targets[j].last_mut() {
                    last.active = false;
                }
            }
            let z = &seg.final_state;
            swarm.agent_states[i] = DVector::from_column_slice(&z[..dx]);
            swarm.target_states[j] = DVector::from_column_slice(&z[dx..z.len() - 1]);
            cumulative[i] += z[z.len() - 1];
            if let Some(kc) = seg.captured_at {
                exit_times[i] = Some(engagement.initial.time + kc as f64 * dt);
                captured.push((i, j));
            }
        }
        for (i, j) in captured {
            swarm.deactivate_pair(i, j);
            sigma[i] = None;
            policies[i] = None;
        }
        k0 = k1;
    }

    let last_k = if swarm.active_agents.is_empty() {
        agents.iter().map(|s| s.len()).max().unwrap_or(1) - 1
    } else {
        horizon_k
    };
    for series in &mut agents {
        let last = series.last().cloned().expect("every agent has an initial sample");
        while series.len() <= last_k {
            series.push(AgentSample {
                state: last.state.clone(),
                control: vec![0.0; du],
                stage_cost: 0.0,
                cumulative_cost: last.cumulative_cost,
                assigned_target: None,
                active: false,
            });
        }
    }
    for series in &mut targets {
        let last = series.last().cloned().expect("every target has an initial sample");
        while series.len() <= last_k {
            series.push(TargetSample {
                state: last.state.clone(),
                active: false,
            });
        }
    }
    let times: Vec<f64> = (0..=last_k).map(|k| engagement.initial.time + k as f64 * dt).collect();
    let min_inter_agent_distance = min_pairwise_distance(engagement, &agents, times.len());

    let status = if swarm.active_agents.is_empty() {
        TerminalStatus::AllCaptured {
            time: exit_times.iter().flatten().fold(engagement.initial.time, |a, &b| a.max(b)),
        }
    } else {
        TerminalStatus::HorizonExceeded {
            active_pairs: swarm.active_agents.len(),
        }
    };
    Ok(SimulationTrace {
        metric: config.metric,
        times,
        agents,
        targets,
        assignment_history: history,
        switch_counts,
        exit_times,
        status,
        assignment_solves: solves,
        initial_assignment_cost: initial_cost,
        invalid_assignment: invalid,
        min_inter_agent_distance,
    })
}

fn min_pairwise_distance(engagement: &Engagement, agents: &[Vec<AgentSample>], len: usize) -> Option<f64> {
    let pos = engagement.agent_model.layout.position();
    let mut best: Option<f64> = None;
    for k in 0..len {
        let active: Vec<&[f64]> = agents
            .iter()
            .filter(|s| s[k].active)
            .map(|s| &s[k].state[pos.clone()])
            .collect();
        for a in 0..active.len() {
            for b in (a + 1)..active.len() {
                let d = active[a]
                    .iter()
                    .zip(active[b])
                    .map(|(p, q)| (p - q) * (p - q))
                    .sum::<f64>()
                    .sqrt();
                best = Some(best.map_or(d, |m| m.min(d)));
            }
        }
    }
    best
}

/// Algorithm with a single assignment at `t = 0`.
pub fn run_dynamics_policy(engagement: &Engagement, config: &EngagementConfig, cache: &PolicyCache) -> Result<SimulationTrace> {
    if config.metric != Metric::Dynamics {
        return Err(Error::InvalidParameter {
            name: "metric",
            reason: "dynamics policy requires the dynamics metric".into(),
        });
    }
    run_engagement(engagement, config, cache)
}

/// Algorithm with periodic Euclidean reassignment.
pub fn run_emd_policy(engagement: &Engagement, config: &EngagementConfig, cache: &PolicyCache) -> Result<SimulationTrace> {
    if !matches!(config.metric, Metric::Euclidean { .. }) {
        return Err(Error::InvalidParameter {
            name: "metric",
            reason: "distance-based policy requires a Euclidean metric".into(),
        });
    }
    run_engagement(engagement, config, cache)
}

/// Swarm state recorded at grid index `k`, with the pairs still active there.
pub fn swarm_state_at(trace: &SimulationTrace, k: usize) -> SwarmState {
    let agent_states = trace.agents.iter().map(|s| DVector::from_column_slice(&s[k].state)).collect();
    let target_states = trace.targets.iter().map(|s| DVector::from_column_slice(&s[k].state)).collect();
    SwarmState {
        time: trace.times[k],
        agent_states,
        target_states,
        active_agents: (0..trace.agents.len()).filter(|&i| trace.agents[i][k].active).collect(),
        active_targets: (0..trace.targets.len()).filter(|&j| trace.targets[j][k].active).collect(),
    }
}
