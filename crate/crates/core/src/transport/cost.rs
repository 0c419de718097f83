use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::dynamics::StateLayout;
use crate::error::{Error, Result};
use crate::parallel::Execution;
use crate::riccati_lqt::{ErrorMap, LinearSystem, PolicyCache, QuadraticCost, TrackingPolicy};

/// Stand-in cost for pairs whose tracker could not be synthesized. Large but
/// finite so solvers stay well-posed; any assignment using it is flagged.
pub const FAILED_PAIR_COST: f64 = 1e15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Metric {
    Dynamics,
    Euclidean { exponent: f64 },
}

/// Row-major `rows × cols` matrix of finite transport costs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
    metric: Metric,
    /// Entries holding [`FAILED_PAIR_COST`] because synthesis failed.
    failed: Vec<(usize, usize)>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>, metric: Metric) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} cost matrix",
                entries.len()
            )));
        }
        if let Some(k) = entries.iter().position(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "cost",
                reason: format!("entry ({}, {}) is not finite", k / cols.max(1), k % cols.max(1)),
            });
        }
        Ok(Self {
            rows,
            cols,
            entries,
            metric,
            failed: Vec::new(),
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], metric: Metric) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch("ragged cost rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat(), metric)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn failed(&self) -> &[(usize, usize)] {
        &self.failed
    }

    pub fn is_failed(&self, i: usize, j: usize) -> bool {
        self.failed.contains(&(i, j))
    }

    /// `Σ_i c_{i,σ(i)}`
    pub fn assignment_cost(&self, sigma: &[usize]) -> f64 {
        sigma.iter().enumerate().map(|(i, &j)| self.get(i, j)).sum()
    }

    /// Every entry multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let mut m = Self::new(self.rows, self.cols, self.entries.iter().map(|c| c * factor).collect(), self.metric)?;
        m.failed = self.failed.clone();
        Ok(m)
    }

    /// Sub-matrix on the given rows and columns.
    pub fn restrict(&self, rows: &[usize], cols: &[usize]) -> Self {
        let entries = rows
            .iter()
            .flat_map(|&i| cols.iter().map(move |&j| self.get(i, j)))
            .collect();
        let failed = self
            .failed
            .iter()
            .filter_map(|&(i, j)| {
                Some((rows.iter().position(|&r| r == i)?, cols.iter().position(|&c| c == j)?))
            })
            .collect();
        Self {
            rows: rows.len(),
            cols: cols.len(),
            entries,
            metric: self.metric,
            failed,
        }
    }
}

/// `c_ij = ‖π_x(x_i) − π_y(y_j)‖^α` over the position slices.
pub fn euclidean_cost(
    agents: &[DVector<f64>],
    agent_layout: &StateLayout,
    targets: &[DVector<f64>],
    target_layout: &StateLayout,
    exponent: f64,
) -> Result<CostMatrix> {
    if !(exponent >= 1.0) || !exponent.is_finite() {
        return Err(Error::InvalidParameter {
            name: "exponent",
            reason: format!("must be finite and >= 1, got {exponent}"),
        });
    }
    let pa = agent_layout.position();
    let pt = target_layout.position();
    if pa.len() != pt.len() {
        return Err(Error::DimensionMismatch(format!(
            "position slices of length {} and {}",
            pa.len(),
            pt.len()
        )));
    }
    for x in agents {
        check_len(x, agent_layout.dim())?;
    }
    for y in targets {
        check_len(y, target_layout.dim())?;
    }
    let mut entries = Vec::with_capacity(agents.len() * targets.len());
    for x in agents {
        let px = x.rows(pa.start, pa.len());
        for y in targets {
            let dist = (px - y.rows(pt.start, pt.len())).norm();
            entries.push(if exponent == 1.0 { dist } else { dist.powf(exponent) });
        }
    }
    CostMatrix::new(agents.len(), targets.len(), entries, Metric::Euclidean { exponent })
}

fn check_len(v: &DVector<f64>, d: usize) -> Result<()> {
    if v.len() != d {
        return Err(Error::DimensionMismatch(format!("state of length {} for layout of {d}", v.len())));
    }
    Ok(())
}

/// An autonomous (closed-loop) target and its current state.
#[derive(Debug, Clone, Copy)]
pub struct TargetRef<'a> {
    pub system: &'a LinearSystem,
    pub state: &'a DVector<f64>,
}

/// Dynamics cost matrix with the trackers that produced it.
#[derive(Debug, Clone)]
pub struct DynamicsCost {
    pub matrix: CostMatrix,
    /// Per-target tracker shared by every agent with the given dynamics.
    policies: Vec<std::result::Result<Arc<TrackingPolicy>, Error>>,
    /// Failure reasons for flagged entries.
    pub failures: Vec<(usize, usize, Error)>,
}

impl DynamicsCost {
    /// Tracker for pair `(i, j)`; agents share dynamics, so this is the
    /// tracker of target `j`.
    pub fn policy(&self, _agent: usize, target: usize) -> Result<Arc<TrackingPolicy>> {
        self.policies[target].clone()
    }

    pub fn policies(&self) -> impl Iterator<Item = Option<&Arc<TrackingPolicy>>> {
        self.policies.iter().map(|p| p.as_ref().ok())
    }
}

/// `c_ij = cost_to_go` of agent `i` tracking target `j`.
///
/// All agents follow `agent_system`. Trackers are built once per target
/// through `cache` (the Riccati solve is shared by all targets with the same
/// drift); the n² entries only evaluate the closed-form value. A pair whose
/// synthesis or evaluation fails gets [`FAILED_PAIR_COST`] and is listed in
/// `failures`.
pub fn dynamics_cost(
    agent_system: &LinearSystem,
    agent_states: &[DVector<f64>],
    targets: &[TargetRef<'_>],
    cost: &QuadraticCost,
    error_map: &ErrorMap,
    cache: &PolicyCache,
    execution: Execution,
) -> Result<DynamicsCost> {
    for x in agent_states {
        check_len(x, agent_system.state_dim())?;
    }
    for t in targets {
        check_len(t.state, t.system.state_dim())?;
    }
    // Sequential so the cache is filled in target order.
    let policies: Vec<std::result::Result<Arc<TrackingPolicy>, Error>> = targets
        .iter()
        .map(|t| cache.tracker(agent_system, t.system, cost, error_map).map(Arc::new))
        .collect();

    let (n, m) = (agent_states.len(), targets.len());
    let values = execution.map_range(n * m, |k| {
        let (i, j) = (k / m, k % m);
        match &policies[j] {
            Ok(p) => p.cost_to_go(&agent_states[i], targets[j].state),
            Err(e) => Err(e.clone()),
        }
    });

    let mut entries = Vec::with_capacity(n * m);
    let mut failures = Vec::new();
    for (k, v) in values.into_iter().enumerate() {
        match v {
            Ok(c) if c.is_finite() => entries.push(c),
            Ok(c) => {
                failures.push((k / m, k % m, Error::SteadyStateUndefined(format!("cost evaluated to {c}"))));
                entries.push(FAILED_PAIR_COST);
            }
            Err(e) => {
                failures.push((k / m, k % m, e));
                entries.push(FAILED_PAIR_COST);
            }
        }
    }
    let mut matrix = CostMatrix::new(n, m, entries, Metric::Dynamics)?;
    matrix.failed = failures.iter().map(|(i, j, _)| (*i, *j)).collect();
    Ok(DynamicsCost {
        matrix,
        policies,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::double_integrator_3d;

    #[test]
    fn three_four_five() {
        let m = double_integrator_3d();
        let x = DVector::from_vec(vec![0.0, 0.0, 0.0, 9.0, 9.0, 9.0]);
        let y = DVector::from_vec(vec![3.0, 4.0, 0.0, -1.0, 0.0, 0.0]);
        let c1 = euclidean_cost(std::slice::from_ref(&x), &m.layout, std::slice::from_ref(&y), &m.layout, 1.0).unwrap();
        assert_eq!(c1.get(0, 0), 5.0);
        let c2 = euclidean_cost(std::slice::from_ref(&x), &m.layout, &[y], &m.layout, 2.0).unwrap();
        assert!((c2.get(0, 0) - 25.0).abs() < 1e-12);
        let c0 = euclidean_cost(std::slice::from_ref(&x), &m.layout, std::slice::from_ref(&x), &m.layout, 1.0).unwrap();
        assert_eq!(c0.get(0, 0), 0.0);
    }

    #[test]
    fn exponent_below_one_is_rejected() {
        let m = double_integrator_3d();
        assert!(euclidean_cost(&[], &m.layout, &[], &m.layout, 0.5).is_err());
    }

    #[test]
    fn non_finite_entries_are_rejected() {
        assert!(CostMatrix::new(1, 2, vec![1.0, f64::NAN], Metric::Dynamics).is_err());
        assert!(CostMatrix::new(1, 2, vec![1.0], Metric::Dynamics).is_err());
    }

    #[test]
    fn restriction_keeps_flags() {
        let mut c = CostMatrix::new(3, 3, (0..9).map(f64::from).collect(), Metric::Dynamics).unwrap();
        c.failed = vec![(2, 1)];
        let r = c.restrict(&[0, 2], &[1, 2]);
        assert_eq!(r.row(1), &[7.0, 8.0]);
        assert_eq!(r.failed(), &[(1, 0)]);
    }
}
