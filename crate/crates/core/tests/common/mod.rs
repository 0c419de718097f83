#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

use dotswarm::transport::CostMatrix;

/// `e^A` by scaling and squaring on a 20-term Taylor series.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let norm = a.abs().row_sum().amax();
    let s = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let scaled = a / 2f64.powi(s);
    let n = a.nrows();
    let mut term = DMatrix::identity(n, n);
    let mut sum = DMatrix::identity(n, n);
    for k in 1..=20 {
        term = &term * &scaled / k as f64;
        sum += &term;
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

/// Flow of `ż = F z + f` over `dt`, via the augmented exponential.
pub fn affine_flow(f: &DMatrix<f64>, f0: &DVector<f64>, dt: f64) -> (DMatrix<f64>, DVector<f64>) {
    let n = f.nrows();
    let mut aug = DMatrix::zeros(n + 1, n + 1);
    aug.view_mut((0, 0), (n, n)).copy_from(&(f * dt));
    aug.view_mut((0, n), (n, 1)).copy_from(&(f0 * dt));
    let e = expm(&aug);
    (e.view((0, 0), (n, n)).into_owned(), e.view((0, n), (n, 1)).column(0).into_owned())
}

/// Composite trapezoid rule on uniformly spaced samples.
pub fn trapezoid(values: &[f64], dt: f64) -> f64 {
    values.windows(2).map(|w| 0.5 * dt * (w[0] + w[1])).sum()
}

/// Minimum of `Σ_i c_{i,σ(i)}` over all permutations, with the
/// lexicographically first minimizer.
pub fn brute_force(c: &CostMatrix) -> (f64, Vec<usize>) {
    fn rec(c: &CostMatrix, prefix: &mut Vec<usize>, used: &mut Vec<bool>, best: &mut (f64, Vec<usize>)) {
        let n = used.len();
        if prefix.len() == n {
            let total: f64 = prefix.iter().enumerate().map(|(i, &j)| c.get(i, j)).sum();
            if total < best.0 {
                *best = (total, prefix.clone());
            }
            return;
        }
        for j in 0..n {
            if !used[j] {
                used[j] = true;
                prefix.push(j);
                rec(c, prefix, used, best);
                prefix.pop();
                used[j] = false;
            }
        }
    }
    let n = c.rows();
    let mut best = (f64::INFINITY, Vec::new());
    rec(c, &mut Vec::new(), &mut vec![false; n], &mut best);
    best
}
