use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Affine linear dynamics `ẋ = drift·x + input·u + offset`.
///
/// An `input_dim` of zero describes an autonomous system such as a target
/// running its own closed-loop controller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSystem {
    drift: DMatrix<f64>,
    input: DMatrix<f64>,
    offset: DVector<f64>,
}

impl LinearSystem {
    pub fn new(drift: DMatrix<f64>, input: DMatrix<f64>, offset: DVector<f64>) -> Result<Self> {
        let d = drift.nrows();
        if !drift.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "drift must be square, got {}x{}",
                drift.nrows(),
                drift.ncols()
            )));
        }
        if d == 0 {
            return Err(Error::InvalidParameter {
                name: "state_dim",
                reason: "must be positive".into(),
            });
        }
        if input.nrows() != d {
            return Err(Error::DimensionMismatch(format!(
                "input has {} rows, drift is {d}x{d}",
                input.nrows()
            )));
        }
        if offset.len() != d {
            return Err(Error::DimensionMismatch(format!(
                "offset has {} entries, drift is {d}x{d}",
                offset.len()
            )));
        }
        Ok(Self { drift, input, offset })
    }

    /// Controlled system without affine drive.
    pub fn controlled(drift: DMatrix<f64>, input: DMatrix<f64>) -> Result<Self> {
        let d = drift.nrows();
        Self::new(drift, input, DVector::zeros(d))
    }

    /// Autonomous affine system (no inputs).
    pub fn autonomous(drift: DMatrix<f64>, offset: DVector<f64>) -> Result<Self> {
        let d = drift.nrows();
        Self::new(drift, DMatrix::zeros(d, 0), offset)
    }

    /// A stationary point: zero drift, no input, no offset.
    pub fn stationary(state_dim: usize) -> Result<Self> {
        Self::autonomous(DMatrix::zeros(state_dim, state_dim), DVector::zeros(state_dim))
    }

    pub fn drift(&self) -> &DMatrix<f64> {
        &self.drift
    }

    pub fn input(&self) -> &DMatrix<f64> {
        &self.input
    }

    pub fn offset(&self) -> &DVector<f64> {
        &self.offset
    }

    pub fn state_dim(&self) -> usize {
        self.drift.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.input.ncols()
    }

    pub fn is_autonomous(&self) -> bool {
        self.input_dim() == 0
    }

    /// True for the stationary system: every state is an equilibrium.
    pub fn is_stationary(&self) -> bool {
        self.is_autonomous()
            && self.drift.iter().all(|&v| v == 0.0)
            && self.offset.iter().all(|&v| v == 0.0)
    }

    pub fn derivative(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let mut dx = &self.drift * x + &self.offset;
        if self.input_dim() > 0 {
            dx += &self.input * u;
        }
        dx
    }
}

/// Quadratic weights `Q` (error, PSD) and `R` (control, PD).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticCost {
    state_weight: DMatrix<f64>,
    control_weight: DMatrix<f64>,
}

impl QuadraticCost {
    pub fn new(state_weight: DMatrix<f64>, control_weight: DMatrix<f64>) -> Result<Self> {
        const TOL_SYM: f64 = super::SYMMETRY_TOLERANCE;
        for (name, m) in [("state_weight", &state_weight), ("control_weight", &control_weight)] {
            if !m.is_square() {
                return Err(Error::DimensionMismatch(format!("{name} must be square")));
            }
            let asym = (m - m.transpose()).amax();
            if asym > TOL_SYM * (1.0 + m.amax()) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("not symmetric (max asymmetry {asym:.3e})"),
                });
            }
        }
        if state_weight.nrows() > 0 {
            let min_q = state_weight.clone().symmetric_eigenvalues().min();
            if min_q < -TOL_SYM * (1.0 + state_weight.amax()) {
                return Err(Error::InvalidParameter {
                    name: "state_weight",
                    reason: format!("not positive semidefinite (min eigenvalue {min_q:.3e})"),
                });
            }
        }
        if control_weight.nrows() > 0 {
            let min_r = control_weight.clone().symmetric_eigenvalues().min();
            if min_r <= 0.0 {
                return Err(Error::InvalidParameter {
                    name: "control_weight",
                    reason: format!("not positive definite (min eigenvalue {min_r:.3e})"),
                });
            }
        }
        Ok(Self { state_weight, control_weight })
    }

    /// `Q = diag(q)`, `R = diag(r)`.
    pub fn diagonal(q: &[f64], r: &[f64]) -> Result<Self> {
        Self::new(
            DMatrix::from_diagonal(&DVector::from_column_slice(q)),
            DMatrix::from_diagonal(&DVector::from_column_slice(r)),
        )
    }

    pub fn state_weight(&self) -> &DMatrix<f64> {
        &self.state_weight
    }

    pub fn control_weight(&self) -> &DMatrix<f64> {
        &self.control_weight
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_rectangular_drift() {
        let r = LinearSystem::new(DMatrix::zeros(2, 3), DMatrix::zeros(2, 1), DVector::zeros(2));
        assert!(matches!(r, Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn rejects_mismatched_input_rows() {
        let r = LinearSystem::controlled(DMatrix::zeros(2, 2), DMatrix::zeros(3, 1));
        assert!(matches!(r, Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn autonomous_system_has_no_inputs() {
        let s = LinearSystem::autonomous(DMatrix::identity(3, 3) * -1.0, DVector::zeros(3)).unwrap();
        assert_eq!(s.input_dim(), 0);
        assert!(s.is_autonomous());
        assert!(!s.is_stationary());
        assert!(LinearSystem::stationary(3).unwrap().is_stationary());
    }

    #[test]
    fn cost_validation() {
        assert!(QuadraticCost::diagonal(&[1.0, 0.0], &[1.0]).is_ok());
        assert!(QuadraticCost::diagonal(&[1.0, -1.0], &[1.0]).is_err());
        assert!(QuadraticCost::diagonal(&[1.0], &[0.0]).is_err());
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(QuadraticCost::new(asym, DMatrix::identity(1, 1)).is_err());
    }
}
