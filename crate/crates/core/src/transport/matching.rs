//! Exact linear assignment by shortest augmenting paths, with the
//! lexicographically smallest optimal permutation returned on ties.

use serde::{Deserialize, Serialize};

use super::cost::CostMatrix;
use crate::error::{Error, Result};

/// Relative slack under which a reduced cost counts as zero.
const TIGHT_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matching {
    /// `sigma[i]` is the column assigned to row `i`.
    pub sigma: Vec<usize>,
    /// `Σ_i c_{i,σ(i)}`, summed in row order.
    pub total: f64,
    /// True if the assignment uses a failed-synthesis entry.
    pub uses_failed_entry: bool,
}

/// Minimizes `Σ_i c_{i,σ(i)}` over permutations.
pub fn solve_matching(cost: &CostMatrix) -> Result<Matching> {
    let n = cost.rows();
    if cost.cols() != n {
        return Err(Error::NonSquare {
            rows: n,
            cols: cost.cols(),
        });
    }
    if n == 0 {
        return Ok(Matching {
            sigma: Vec::new(),
            total: 0.0,
            uses_failed_entry: false,
        });
    }
    let (sigma0, u, v) = shortest_augmenting_path(cost);
    let tight: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| {
                    let c = cost.get(i, j);
                    let reduced = c - u[i] - v[j];
                    j == sigma0[i] || reduced <= TIGHT_TOLERANCE * (1.0 + c.abs() + u[i].abs() + v[j].abs())
                })
                .collect()
        })
        .collect();
    let sigma = lexicographic_perfect_matching(&tight, n);
    let total = cost.assignment_cost(&sigma);
    let uses_failed_entry = sigma.iter().enumerate().any(|(i, &j)| cost.is_failed(i, j));
    Ok(Matching {
        sigma,
        total,
        uses_failed_entry,
    })
}

/// Returns an optimal assignment and dual potentials `(u, v)` with
/// `c_ij − u_i − v_j ≥ 0`, equality on the assignment.
fn shortest_augmenting_path(cost: &CostMatrix) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
    let n = cost.rows();
    // 1-based with a virtual column 0, as in the classical O(n³) scheme.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0usize;
        let mut min_v = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost.get(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < min_v[j] {
                        min_v[j] = cur;
                        way[j] = j0;
                    }
                    if min_v[j] < delta {
                        delta = min_v[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_v[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut sigma = vec![0usize; n];
    for j in 1..=n {
        sigma[owner[j] - 1] = j - 1;
    }
    (sigma, u[1..].to_vec(), v[1..].to_vec())
}

/// Greedy row-by-row choice of the smallest column that still leaves a
/// perfect matching of the remaining rows in the bipartite graph `adj`.
fn lexicographic_perfect_matching(adj: &[Vec<usize>], n: usize) -> Vec<usize> {
    let mut sigma = vec![usize::MAX; n];
    let mut taken = vec![false; n];
    for i in 0..n {
        let mut chosen = None;
        for &j in &adj[i] {
            if taken[j] {
                continue;
            }
            taken[j] = true;
            if completes(adj, i + 1, &taken) {
                chosen = Some(j);
                break;
            }
            taken[j] = false;
        }
        // The tight graph holds the optimal assignment, so a completion
        // always exists.
        sigma[i] = chosen.expect("tight graph admits a perfect matching");
    }
    sigma
}

/// Whether rows `from..n` can be matched into the untaken columns.
fn completes(adj: &[Vec<usize>], from: usize, taken: &[bool]) -> bool {
    let n = taken.len();
    let mut col_owner = vec![usize::MAX; n];
    for i in from..n {
        let mut seen = vec![false; n];
        if !augment(adj, i, taken, &mut seen, &mut col_owner) {
            return false;
        }
    }
    true
}

fn augment(adj: &[Vec<usize>], i: usize, taken: &[bool], seen: &mut [bool], col_owner: &mut [usize]) -> bool {
    for &j in &adj[i] {
        if taken[j] || seen[j] {
            continue;
        }
        seen[j] = true;
        if col_owner[j] == usize::MAX || augment(adj, col_owner[j], taken, seen, col_owner) {
            col_owner[j] = i;
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::cost::Metric;

    fn m(rows: &[Vec<f64>]) -> CostMatrix {
        CostMatrix::from_rows(rows, Metric::Dynamics).unwrap()
    }

    #[test]
    fn diagonal_and_antidiagonal() {
        let a = solve_matching(&m(&[vec![1.0, 2.0], vec![2.0, 1.0]])).unwrap();
        assert_eq!((a.sigma, a.total), (vec![0, 1], 2.0));
        let b = solve_matching(&m(&[vec![2.0, 1.0], vec![1.0, 2.0]])).unwrap();
        assert_eq!((b.sigma, b.total), (vec![1, 0], 2.0));
    }

    #[test]
    fn ties_resolve_to_smallest_permutation() {
        let all_equal = m(&vec![vec![3.0; 4]; 4]);
        assert_eq!(solve_matching(&all_equal).unwrap().sigma, vec![0, 1, 2, 3]);
        // both derangements [1, 2, 0] and [2, 0, 1] cost 0
        let c = m(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]);
        let r = solve_matching(&c).unwrap();
        assert_eq!(r.total, 0.0);
        assert_eq!(r.sigma, vec![1, 2, 0]);
    }

    #[test]
    fn rectangular_is_rejected() {
        let c = CostMatrix::new(2, 3, vec![0.0; 6], Metric::Dynamics).unwrap();
        assert_eq!(solve_matching(&c), Err(Error::NonSquare { rows: 2, cols: 3 }));
    }

    #[test]
    fn single_and_empty() {
        assert_eq!(solve_matching(&m(&[vec![7.5]])).unwrap().sigma, vec![0]);
        let e = CostMatrix::new(0, 0, vec![], Metric::Dynamics).unwrap();
        assert!(solve_matching(&e).unwrap().sigma.is_empty());
    }
}
