//! Dense linear-algebra kernels built on complex Schur forms.
//!
//! nalgebra provides an (unordered) complex Schur decomposition; ordering of
//! the diagonal and the Bartels-Stewart Sylvester solver live here.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;

const SCHUR_MAX_ITER: usize = 100_000;

pub fn to_complex(m: &DMatrix<f64>) -> CMatrix {
    m.map(|x| C64::new(x, 0.0))
}

pub fn real_part(m: &CMatrix) -> DMatrix<f64> {
    m.map(|z| z.re)
}

/// Complex Schur decomposition `m = Z T Z^H` with `T` upper triangular.
pub fn complex_schur(m: &CMatrix) -> Result<(CMatrix, CMatrix)> {
    let schur = nalgebra::linalg::Schur::try_new(m.clone(), f64::EPSILON, SCHUR_MAX_ITER)
        .ok_or(Error::NoConvergence("Schur decomposition"))?;
    let (z, mut t) = schur.unpack();
    // Clear the strictly-lower part; nalgebra leaves exact zeros there but
    // downstream triangular solves rely on it.
    for j in 0..t.ncols() {
        for i in (j + 1)..t.nrows() {
            t[(i, j)] = C64::new(0.0, 0.0);
        }
    }
    Ok((z, t))
}

/// Swaps the adjacent diagonal entries `k` and `k + 1` of the triangular
/// factor, updating the Schur vectors so that `Z T Z^H` is preserved.
fn swap_adjacent(z: &mut CMatrix, t: &mut CMatrix, k: usize) {
    let t11 = t[(k, k)];
    let t22 = t[(k + 1, k + 1)];
    let t12 = t[(k, k + 1)];
    // Eigenvector of the 2x2 block for eigenvalue t22 is (t12, t22 - t11).
    let v0 = t12;
    let v1 = t22 - t11;
    let norm = (v0.norm_sqr() + v1.norm_sqr()).sqrt();
    if norm == 0.0 {
        return;
    }
    let c = v0 / norm;
    let s = v1 / norm;
    // G = [[c, -conj(s)], [s, conj(c)]] is unitary; T <- G^H T G, Z <- Z G.
    let n = t.nrows();
    for j in 0..n {
        let a = t[(k, j)];
        let b = t[(k + 1, j)];
        t[(k, j)] = c.conj() * a + s.conj() * b;
        t[(k + 1, j)] = -s * a + c * b;
    }
    for i in 0..n {
        let a = t[(i, k)];
        let b = t[(i, k + 1)];
        t[(i, k)] = a * c + b * s;
        t[(i, k + 1)] = -a * s.conj() + b * c.conj();
    }
    for i in 0..n {
        let a = z[(i, k)];
        let b = z[(i, k + 1)];
        z[(i, k)] = a * c + b * s;
        z[(i, k + 1)] = -a * s.conj() + b * c.conj();
    }
    t[(k + 1, k)] = C64::new(0.0, 0.0);
    t[(k, k)] = t22;
    t[(k + 1, k + 1)] = t11;
}

/// Reorders a complex Schur form so that every eigenvalue for which
/// `select` holds appears in the leading block. Returns the size of that
/// block.
pub fn reorder_schur<F>(z: &mut CMatrix, t: &mut CMatrix, select: F) -> usize
where
    F: Fn(C64) -> bool,
{
    let n = t.nrows();
    let mut placed = 0;
    for j in 0..n {
        if select(t[(j, j)]) {
            for k in (placed..j).rev() {
                swap_adjacent(z, t, k);
            }
            placed += 1;
        }
    }
    placed
}

pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<C64>> {
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    let (_, t) = complex_schur(&to_complex(m))?;
    Ok((0..t.nrows()).map(|i| t[(i, i)]).collect())
}

/// Largest real part of the spectrum.
pub fn spectral_abscissa(m: &DMatrix<f64>) -> Result<f64> {
    Ok(eigenvalues(m)?
        .into_iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Solves `A X + X B = C` (Bartels-Stewart on complex Schur forms).
pub fn solve_sylvester(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (m, n) = (a.nrows(), b.nrows());
    if !a.is_square() || !b.is_square() || c.shape() != (m, n) {
        return Err(Error::DimensionMismatch(format!(
            "Sylvester: A {:?}, B {:?}, C {:?}",
            a.shape(),
            b.shape(),
            c.shape()
        )));
    }
    if m == 0 || n == 0 {
        return Ok(DMatrix::zeros(m, n));
    }
    let (u, ta) = complex_schur(&to_complex(a))?;
    let (v, tb) = complex_schur(&to_complex(b))?;
    let f = u.adjoint() * to_complex(c) * &v;

    let scale = a.amax().max(b.amax()).max(f64::MIN_POSITIVE);
    let mut y = CMatrix::zeros(m, n);
    for j in 0..n {
        let mut rhs: DVector<C64> = f.column(j).into_owned();
        for k in 0..j {
            let coef = tb[(k, j)];
            if coef != C64::new(0.0, 0.0) {
                rhs -= y.column(k) * coef;
            }
        }
        let shift = tb[(j, j)];
        for i in (0..m).rev() {
            let mut acc = rhs[i];
            for l in (i + 1)..m {
                acc -= ta[(i, l)] * y[(l, j)];
            }
            let pivot = ta[(i, i)] + shift;
            if pivot.norm() <= 1e-14 * scale {
                return Err(Error::SteadyStateUndefined(
                    "Sylvester operator is singular (spectra of A and -B intersect)".into(),
                ));
            }
            y[(i, j)] = acc / pivot;
        }
    }
    Ok(real_part(&(u * y * v.adjoint())))
}

/// Solves the continuous Lyapunov equation `Aᵀ X + X A + Q = 0`.
pub fn solve_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let x = solve_sylvester(&a.transpose(), a, &(-q))?;
    Ok(symmetrize(&x))
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Numerical rank via singular values, relative to the largest one.
pub fn numerical_rank(m: &CMatrix, rel_tol: f64) -> usize {
    let sv = m.clone().svd(false, false).singular_values;
    let top = sv.iter().cloned().fold(0.0, f64::max);
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * top).count()
}

/// Quadratic form `vᵀ M v`.
pub fn quad_form(m: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    v.dot(&(m * v))
}
