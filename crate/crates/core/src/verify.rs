//! Built-in oracle suite: each check recomputes a quantity along an
//! independent route and compares.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dynamics::{integrate_grid, Flow, OdeConfig};
use crate::engine::{assign, run_dynamics_policy, swarm_state_at, EngagementConfig, PairDynamics};
use crate::error::Result;
use crate::parallel::Execution;
use crate::riccati_lqt::{care_residual, is_symmetric_psd, solve_care, PolicyCache, QuadraticCost};
use crate::scenarios::{generate, ScenarioRng, ScenarioSpec, World};
use crate::transport::{solve_matching, CostMatrix, Metric};

/// Deliberate corruption used to exercise the failure path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fault {
    /// Perturbs every Riccati solution before its residual is taken.
    CareResidual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub name: String,
    pub passed: bool,
    pub cases: usize,
    /// Largest normalized discrepancy seen; the check passes below 1.
    pub worst: f64,
    pub detail: String,
}

const SEED: u64 = 0x5eed;

pub fn run_suite(fault: Option<Fault>) -> Vec<OracleResult> {
    vec![
        care_oracle(fault),
        matching_oracle(),
        cost_consistency_oracle(),
        stationarity_oracle(),
    ]
}

fn finish(name: &str, cases: usize, outcome: Result<(f64, String)>) -> OracleResult {
    match outcome {
        Ok((worst, detail)) => OracleResult {
            name: name.into(),
            passed: worst < 1.0,
            cases,
            worst,
            detail,
        },
        Err(e) => OracleResult {
            name: name.into(),
            passed: false,
            cases,
            worst: f64::INFINITY,
            detail: e.to_string(),
        },
    }
}

fn random_matrix(rng: &mut ScenarioRng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.uniform(-1.0, 1.0))
}

/// A random system with `Q = CᵀC + I` and `R = DᵀD + I`, which is
/// detectable by construction and stabilizable with probability one.
pub fn random_care_problem(rng: &mut ScenarioRng, d: usize, m: usize) -> Result<(DMatrix<f64>, DMatrix<f64>, QuadraticCost)> {
    let a = random_matrix(rng, d, d);
    let b = random_matrix(rng, d, m);
    let c = random_matrix(rng, d, d);
    let e = random_matrix(rng, m, m);
    let q = c.transpose() * c + DMatrix::identity(d, d);
    let r = e.transpose() * e + DMatrix::identity(m, m);
    Ok((a, b, QuadraticCost::new(q, r)?))
}

fn care_oracle(fault: Option<Fault>) -> OracleResult {
    let cases = 50;
    let outcome = (|| {
        let mut rng = ScenarioRng::new(SEED);
        let mut worst: f64 = 0.0;
        for _ in 0..cases {
            let d = 1 + rng.below(12) as usize;
            let m = 1 + rng.below(d as u64) as usize;
            let (a, b, cost) = random_care_problem(&mut rng, d, m)?;
            let mut p = solve_care(&a, &b, &cost)?;
            if fault == Some(Fault::CareResidual) {
                p[(0, 0)] += 1e-3 * (1.0 + p.norm());
            }
            let res = care_residual(&a, &b, cost.state_weight(), cost.control_weight(), &p);
            worst = worst.max(res / (1e-9 * (1.0 + p.norm())));
            if !is_symmetric_psd(&p) {
                worst = f64::INFINITY;
            }
        }
        Ok((worst, "residual / (1e-9 (1 + |P|))".into()))
    })();
    finish("care_residual", cases, outcome)
}

/// Every permutation of `0..n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for j in 0..used.len() {
            if !used[j] {
                used[j] = true;
                prefix.push(j);
                rec(prefix, used, out);
                prefix.pop();
                used[j] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

fn matching_oracle() -> OracleResult {
    let mut cases = 0;
    let outcome = (|| {
        let mut rng = ScenarioRng::new(SEED + 1);
        let mut mismatches = 0;
        for n in 2..=6 {
            let perms = permutations(n);
            for _ in 0..20 {
                cases += 1;
                let entries: Vec<f64> = (0..n * n).map(|_| rng.below(10) as f64).collect();
                let c = CostMatrix::new(n, n, entries, Metric::Dynamics)?;
                let got = solve_matching(&c)?;
                let best = perms
                    .iter()
                    .map(|p| p.iter().enumerate().map(|(i, &j)| c.get(i, j)).sum::<f64>())
                    .fold(f64::INFINITY, f64::min);
                if got.total != best {
                    mismatches += 1;
                }
            }
        }
        Ok((mismatches as f64, format!("{mismatches} optimal values differ from enumeration")))
    })();
    finish("matching_brute_force", cases, outcome)
}

/// Integrates one pair to `horizon` and returns the trapezoid sum of the
/// stage cost on the output grid.
pub fn quadrature_cost(pair: &PairDynamics, z0: &[f64], horizon: f64, config: &OdeConfig) -> Result<f64> {
    let mut work = pair.work();
    let n = pair.joint_dim();
    let mut state = z0[..n].to_vec();
    state.push(0.0);
    let mut samples: Vec<(f64, f64)> = Vec::new();
    integrate_grid(
        |_, z, dz| pair.rhs(z, dz, &mut work),
        0.0,
        &state,
        horizon,
        config,
        |_, t, z| {
            samples.push((t, pair.stage_cost(z)));
            Flow::Continue
        },
    )?;
    Ok(samples.windows(2).map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1)).sum())
}

fn cost_consistency_oracle() -> OracleResult {
    let cases = 10;
    let outcome = (|| {
        let mut worst: f64 = 0.0;
        let config = OdeConfig {
            output_dt: 1e-3,
            ..OdeConfig::default()
        };
        for k in 0..cases {
            let s = generate(&ScenarioSpec::benchmark(World::DoubleIntegrator, 1, SEED + 2 + k as u64))?;
            let e = &s.engagement;
            let cache = PolicyCache::new();
            let policy = cache.tracker(&e.agent_model.system, &e.target_systems[0], &e.cost, &e.error_map)?;
            let (x, y) = (&e.initial.agent_states[0], &e.initial.target_states[0]);
            let closed = policy.cost_to_go(x, y)?;
            let pair = PairDynamics::new(&policy, y)?;
            let z0: Vec<f64> = x.iter().chain(y.iter()).copied().collect();
            let integrated = quadrature_cost(&pair, &z0, 20.0, &config)?;
            worst = worst.max((integrated - closed).abs() / (0.01 * closed.abs()));
        }
        Ok((worst, "|quadrature − closed form| / 1%".into()))
    })();
    finish("cost_consistency", cases, outcome)
}

/// Re-solves the dynamics assignment at `samples` interior grid points of a
/// dynamics-policy run. Returns `(checks, differing σ, differing σ whose
/// cost exceeds the restriction's by more than the relative tolerance)`.
pub fn stationarity_probe(spec: &ScenarioSpec, config: &EngagementConfig, samples: usize, tolerance: f64) -> Result<(usize, usize, usize)> {
    let s = generate(spec)?;
    let cache = PolicyCache::new();
    let trace = run_dynamics_policy(&s.engagement, config, &cache)?;
    let sigma0 = &trace.assignment_history[0].sigma;
    let last = trace.times.len() - 1;
    let (mut checks, mut differ, mut violations) = (0, 0, 0);
    for q in 1..=samples {
        let k = q * last / (samples + 1);
        let swarm = swarm_state_at(&trace, k);
        if swarm.active_agents.is_empty() {
            continue;
        }
        checks += 1;
        let a = assign(&s.engagement, &swarm, Metric::Dynamics, &cache, Execution::Sequential)?;
        if swarm.active_agents.iter().all(|&i| a.sigma[i] == sigma0[i]) {
            continue;
        }
        differ += 1;
        let col = |j: usize| swarm.active_targets.iter().position(|&t| t == j).expect("active target");
        let restricted: f64 = swarm
            .active_agents
            .iter()
            .enumerate()
            .map(|(r, &i)| a.matrix.get(r, col(sigma0[i].expect("active agent assigned"))))
            .sum();
        if restricted - a.cost > tolerance * a.cost.abs() {
            violations += 1;
        }
    }
    Ok((checks, differ, violations))
}

fn stationarity_oracle() -> OracleResult {
    let cases = 3;
    let outcome = (|| {
        let mut violations = 0;
        let config = EngagementConfig::new(Metric::Dynamics, 1.0, 10.0);
        for k in 0..cases {
            let spec = ScenarioSpec::benchmark(World::DoubleIntegrator, 5, SEED + 20 + k as u64);
            violations += stationarity_probe(&spec, &config, 5, 1e-9)?.2;
        }
        Ok((violations as f64, format!("{violations} re-solves beat the initial assignment")))
    })();
    finish("stationarity", cases, outcome)
}
