//! Continuous algebraic Riccati equation
//!
//! ```text
//! AᵀP + PA − PBR⁻¹BᵀP + Q = 0
//! ```
//!
//! solved for its stabilizing solution by the invariant-subspace method: the
//! Hamiltonian `[[A, −BR⁻¹Bᵀ], [−Q, −Aᵀ]]` is reduced to complex Schur form,
//! the stable eigenvalues are moved to the leading block, and `P = U₂₁U₁₁⁻¹`
//! is read off the leading Schur vectors. Newton (Kleinman) steps refine the
//! result when the residual is above tolerance.

use nalgebra::DMatrix;

use super::system::QuadraticCost;
use super::{CARE_TOLERANCE, SYMMETRY_TOLERANCE};
use crate::error::{Error, Result};
use crate::linalg::{self, C64};

const MAX_NEWTON_STEPS: usize = 4;

/// Solves the CARE for `(drift, input)` with weights `cost`.
///
/// The returned matrix is symmetric and satisfies
/// `‖residual‖_F ≤ CARE_TOLERANCE · (1 + ‖P‖_F)`.
pub fn solve_care(drift: &DMatrix<f64>, input: &DMatrix<f64>, cost: &QuadraticCost) -> Result<DMatrix<f64>> {
    let d = drift.nrows();
    let q = cost.state_weight();
    let r = cost.control_weight();
    check_dims(drift, input, q, r)?;

    if !is_stabilizable(drift, input)? {
        return Err(Error::NotStabilizable);
    }
    if !is_detectable(drift, q)? {
        return Err(Error::NotDetectable);
    }

    let r_chol = r.clone().cholesky().ok_or(Error::InvalidParameter {
        name: "control_weight",
        reason: "not positive definite".into(),
    })?;
    let s = input * r_chol.solve(&input.transpose());

    let mut h = DMatrix::<f64>::zeros(2 * d, 2 * d);
    h.view_mut((0, 0), (d, d)).copy_from(drift);
    h.view_mut((0, d), (d, d)).copy_from(&(-&s));
    h.view_mut((d, 0), (d, d)).copy_from(&(-q));
    h.view_mut((d, d), (d, d)).copy_from(&(-drift.transpose()));

    let (mut z, mut t) = linalg::complex_schur(&linalg::to_complex(&h))?;
    let axis_tol = 1e-10 * (1.0 + h.amax());
    if (0..2 * d).any(|i| t[(i, i)].re.abs() <= axis_tol) {
        // Eigenvalues on the imaginary axis: no stabilizing solution.
        return Err(Error::NotStabilizable);
    }
    let stable = linalg::reorder_schur(&mut z, &mut t, |l: C64| l.re < 0.0);
    if stable != d {
        return Err(Error::NotStabilizable);
    }

    let u11 = z.view((0, 0), (d, d)).into_owned();
    let u21 = z.view((d, 0), (d, d)).into_owned();
    // P U11 = U21  <=>  U11ᵀ Pᵀ = U21ᵀ
    let pt = u11
        .transpose()
        .lu()
        .solve(&u21.transpose())
        .ok_or(Error::NotStabilizable)?;
    let mut p = linalg::symmetrize(&linalg::real_part(&pt.transpose()));

    let tolerance = |p: &DMatrix<f64>| CARE_TOLERANCE * (1.0 + p.norm());
    let mut residual = care_residual(drift, input, q, r, &p);
    let mut steps = 0;
    while residual > tolerance(&p) && steps < MAX_NEWTON_STEPS {
        let candidate = newton_step(drift, input, q, r, &p)?;
        let next = care_residual(drift, input, q, r, &candidate);
        if !(next < residual) {
            break;
        }
        p = candidate;
        residual = next;
        steps += 1;
    }
    if residual > tolerance(&p) {
        return Err(Error::IllConditioned {
            residual,
            tolerance: tolerance(&p),
        });
    }
    Ok(p)
}

fn check_dims(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<()> {
    let d = a.nrows();
    if !a.is_square() || b.nrows() != d || q.shape() != (d, d) || r.shape() != (b.ncols(), b.ncols()) {
        return Err(Error::DimensionMismatch(format!(
            "CARE: A {:?}, B {:?}, Q {:?}, R {:?}",
            a.shape(),
            b.shape(),
            q.shape(),
            r.shape()
        )));
    }
    Ok(())
}

/// Frobenius norm of `AᵀP + PA − PBR⁻¹BᵀP + Q`.
pub fn care_residual(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> f64 {
    let pb = p * b;
    let k = match r.clone().cholesky() {
        Some(c) => c.solve(&pb.transpose()),
        None => return f64::INFINITY,
    };
    let res = a.transpose() * p + p * a - &pb * k + q;
    res.norm()
}

/// One Kleinman iteration: solve the Lyapunov equation of the closed loop
/// induced by the current gain.
fn newton_step(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let r_chol = r.clone().cholesky().ok_or(Error::InvalidParameter {
        name: "control_weight",
        reason: "not positive definite".into(),
    })?;
    let k = r_chol.solve(&(b.transpose() * p));
    let a_cl = a - b * &k;
    let rhs = q + k.transpose() * r * &k;
    linalg::solve_lyapunov(&a_cl, &rhs)
}

fn marginal_modes(a: &DMatrix<f64>) -> Result<Vec<C64>> {
    let tol = 1e-8 * (1.0 + a.amax());
    Ok(linalg::eigenvalues(a)?
        .into_iter()
        .filter(|l| l.re >= -tol)
        .collect())
}

/// PBH test: `rank [A − λI, B] = d` for every eigenvalue with `Re λ ≥ 0`.
pub fn is_stabilizable(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<bool> {
    let d = a.nrows();
    let ac = linalg::to_complex(a);
    let bc = linalg::to_complex(b);
    for lambda in marginal_modes(a)? {
        let mut m = linalg::CMatrix::zeros(d, d + b.ncols());
        m.view_mut((0, 0), (d, d))
            .copy_from(&(&ac - linalg::CMatrix::identity(d, d) * lambda));
        m.view_mut((0, d), (d, b.ncols())).copy_from(&bc);
        if linalg::numerical_rank(&m, 1e-10) < d {
            return Ok(false);
        }
    }
    Ok(true)
}

/// PBH test on `(A, Q)`; `Q v = 0` iff `Q^{1/2} v = 0` for PSD `Q`.
pub fn is_detectable(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<bool> {
    let d = a.nrows();
    let ac = linalg::to_complex(a);
    let qc = linalg::to_complex(q);
    for lambda in marginal_modes(a)? {
        let mut m = linalg::CMatrix::zeros(2 * d, d);
        m.view_mut((0, 0), (d, d))
            .copy_from(&(&ac - linalg::CMatrix::identity(d, d) * lambda));
        m.view_mut((d, 0), (d, d)).copy_from(&qc);
        if linalg::numerical_rank(&m, 1e-10) < d {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Smallest eigenvalue of a symmetric matrix, for PSD checks.
pub fn min_symmetric_eigenvalue(p: &DMatrix<f64>) -> f64 {
    p.clone().symmetric_eigenvalues().min()
}

/// True when `p` is symmetric PSD within the crate tolerances.
pub fn is_symmetric_psd(p: &DMatrix<f64>) -> bool {
    let scale = 1.0 + p.norm();
    (p - p.transpose()).amax() <= SYMMETRY_TOLERANCE * scale
        && min_symmetric_eigenvalue(p) >= -SYMMETRY_TOLERANCE * scale
}
