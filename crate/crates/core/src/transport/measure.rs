use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SIMPLEX_TOLERANCE: f64 = 1e-12;
const MARGINAL_TOLERANCE: f64 = 1e-9;

/// Weighted sum of Dirac masses at `locations`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure<T> {
    locations: Vec<T>,
    weights: Vec<f64>,
}

impl<T> DiscreteMeasure<T> {
    pub fn new(locations: Vec<T>, weights: Vec<f64>) -> Result<Self> {
        if locations.len() != weights.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} locations, {} weights",
                locations.len(),
                weights.len()
            )));
        }
        check_simplex(&weights)?;
        Ok(Self { locations, weights })
    }

    /// Equal mass `1/n` on every location.
    pub fn uniform(locations: Vec<T>) -> Result<Self> {
        let n = locations.len();
        Self::new(locations, vec![1.0 / n as f64; n])
    }

    pub fn locations(&self) -> &[T] {
        &self.locations
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Checks membership of the probability simplex.
pub fn check_simplex(weights: &[f64]) -> Result<()> {
    if weights.is_empty() {
        return Err(Error::InvalidParameter {
            name: "weights",
            reason: "empty".into(),
        });
    }
    if let Some(w) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "weights",
            reason: format!("entry {w} is negative or not finite"),
        });
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > SIMPLEX_TOLERANCE {
        return Err(Error::InvalidParameter {
            name: "weights",
            reason: format!("sum to {total}, expected 1"),
        });
    }
    Ok(())
}

/// Transport plan between two discrete measures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    matrix: DMatrix<f64>,
    row_marginal: Vec<f64>,
    col_marginal: Vec<f64>,
}

impl Coupling {
    /// Validates non-negativity and both marginals to 1e-9.
    pub fn new(matrix: DMatrix<f64>, row_marginal: Vec<f64>, col_marginal: Vec<f64>) -> Result<Self> {
        if matrix.nrows() != row_marginal.len() || matrix.ncols() != col_marginal.len() {
            return Err(Error::DimensionMismatch(format!(
                "coupling {:?} with marginals {} / {}",
                matrix.shape(),
                row_marginal.len(),
                col_marginal.len()
            )));
        }
        if matrix.iter().any(|&p| p < -MARGINAL_TOLERANCE || !p.is_finite()) {
            return Err(Error::Infeasible("coupling has negative or non-finite mass".into()));
        }
        for (i, a) in row_marginal.iter().enumerate() {
            let s: f64 = matrix.row(i).sum();
            if (s - a).abs() > MARGINAL_TOLERANCE {
                return Err(Error::Infeasible(format!("row {i} carries {s}, expected {a}")));
            }
        }
        for (j, b) in col_marginal.iter().enumerate() {
            let s: f64 = matrix.column(j).sum();
            if (s - b).abs() > MARGINAL_TOLERANCE {
                return Err(Error::Infeasible(format!("column {j} carries {s}, expected {b}")));
            }
        }
        Ok(Self {
            matrix,
            row_marginal,
            col_marginal,
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn row_marginal(&self) -> &[f64] {
        &self.row_marginal
    }

    pub fn col_marginal(&self) -> &[f64] {
        &self.col_marginal
    }

    /// If the coupling is a `1/n`-scaled permutation matrix, returns the
    /// permutation (row `i` sends its mass to column `σ(i)`).
    pub fn as_permutation(&self, tolerance: f64) -> Option<Vec<usize>> {
        let n = self.matrix.nrows();
        if self.matrix.ncols() != n {
            return None;
        }
        let mass = 1.0 / n as f64;
        let mut sigma = Vec::with_capacity(n);
        let mut used = vec![false; n];
        for i in 0..n {
            let mut hit = None;
            for j in 0..n {
                let p = self.matrix[(i, j)];
                if (p - mass).abs() <= tolerance {
                    if hit.is_some() {
                        return None;
                    }
                    hit = Some(j);
                } else if p.abs() > tolerance {
                    return None;
                }
            }
            let j = hit?;
            if used[j] {
                return None;
            }
            used[j] = true;
            sigma.push(j);
        }
        Some(sigma)
    }

    /// The coupling `p_ij = 1/n` iff `j = σ(i)`.
    pub fn from_permutation(sigma: &[usize]) -> Result<Self> {
        let n = sigma.len();
        let mut m = DMatrix::zeros(n, n);
        for (i, &j) in sigma.iter().enumerate() {
            if j >= n {
                return Err(Error::InvalidParameter {
                    name: "sigma",
                    reason: format!("index {j} out of range"),
                });
            }
            m[(i, j)] = 1.0 / n as f64;
        }
        let w = vec![1.0 / n as f64; n];
        Self::new(m, w.clone(), w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplex_checks() {
        assert!(check_simplex(&[0.5, 0.5]).is_ok());
        assert!(check_simplex(&[0.5, 0.6]).is_err());
        assert!(check_simplex(&[1.5, -0.5]).is_err());
        assert!(check_simplex(&[]).is_err());
        assert!(DiscreteMeasure::new(vec![1, 2], vec![1.0]).is_err());
        assert_eq!(DiscreteMeasure::uniform(vec![1, 2, 3, 4]).unwrap().weights()[2], 0.25);
    }

    #[test]
    fn permutation_roundtrip() {
        let c = Coupling::from_permutation(&[2, 0, 1]).unwrap();
        assert_eq!(c.as_permutation(1e-12), Some(vec![2, 0, 1]));
        assert!(Coupling::from_permutation(&[0, 0, 1]).is_err());
    }

    #[test]
    fn split_mass_is_not_a_permutation() {
        let m = DMatrix::from_element(2, 2, 0.25);
        let c = Coupling::new(m, vec![0.5, 0.5], vec![0.5, 0.5]).unwrap();
        assert_eq!(c.as_permutation(1e-9), None);
    }
}
