use minilp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem};
use nalgebra::DMatrix;

use super::cost::CostMatrix;
use super::measure::{check_simplex, Coupling};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    pub coupling: Coupling,
    /// `Σ_ij c_ij p_ij`
    pub objective: f64,
}

/// Solves `min Σ c_ij p_ij` over couplings with marginals `a` and `b`.
///
/// Costs are rescaled to unit magnitude before the simplex solve; the
/// objective is recomputed on the original costs.
pub fn solve_kantorovich(cost: &CostMatrix, a: &[f64], b: &[f64]) -> Result<TransportPlan> {
    let (n, m) = (cost.rows(), cost.cols());
    if a.len() != n || b.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "{n}x{m} cost with marginals of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    check_simplex(a).map_err(|e| Error::Infeasible(format!("row marginal: {e}")))?;
    check_simplex(b).map_err(|e| Error::Infeasible(format!("column marginal: {e}")))?;

    let scale = cost.entries().iter().fold(0.0f64, |s, c| s.max(c.abs()));
    let scale = if scale > 0.0 { scale } else { 1.0 };

    let mut problem = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<_> = (0..n * m)
        .map(|k| problem.add_var(cost.get(k / m, k % m) / scale, (0.0, f64::INFINITY)))
        .collect();
    for (i, &ai) in a.iter().enumerate() {
        let mut e = LinearExpr::empty();
        for j in 0..m {
            e.add(vars[i * m + j], 1.0);
        }
        problem.add_constraint(e, ComparisonOp::Eq, ai);
    }
    for (j, &bj) in b.iter().enumerate() {
        let mut e = LinearExpr::empty();
        for i in 0..n {
            e.add(vars[i * m + j], 1.0);
        }
        problem.add_constraint(e, ComparisonOp::Eq, bj);
    }
    let solution = problem
        .solve()
        .map_err(|e| Error::Infeasible(format!("linear program: {e}")))?;

    let matrix = DMatrix::from_fn(n, m, |i, j| solution[vars[i * m + j]].max(0.0));
    let objective = (0..n)
        .flat_map(|i| (0..m).map(move |j| (i, j)))
        .map(|(i, j)| cost.get(i, j) * matrix[(i, j)])
        .sum();
    Ok(TransportPlan {
        coupling: Coupling::new(matrix, a.to_vec(), b.to_vec())?,
        objective,
    })
}
