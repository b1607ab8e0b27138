//! Small dense helpers on top of faer used by the solver and the checks.

use faer::linalg::triangular_solve::solve_lower_triangular_in_place;
use faer::linalg::solvers::DenseSolveCore;
use faer::{Mat, Par, Side};

/// Eigenvalues of a symmetric matrix, nondecreasing. Only the lower triangle is read.
pub fn sym_eigenvalues(a: &Mat<f64>) -> Vec<f64> {
    if a.nrows() == 0 {
        return Vec::new();
    }
    a.self_adjoint_eigenvalues(Side::Lower)
        .unwrap_or_else(|_| vec![f64::NAN; a.nrows()])
}

/// Smallest eigenvalue of a symmetric matrix (`+inf` for an empty matrix).
pub fn min_eigenvalue(a: &Mat<f64>) -> f64 {
    sym_eigenvalues(a).first().copied().unwrap_or(f64::INFINITY)
}

/// `(A + A^T) / 2`.
pub fn sym_part(a: &Mat<f64>) -> Mat<f64> {
    let n = a.nrows();
    Mat::from_fn(n, n, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]))
}

/// Frobenius inner product `sum_ij A[i,j] B[i,j]`.
pub fn frob_dot(a: &Mat<f64>, b: &Mat<f64>) -> f64 {
    let mut s = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            s += a[(i, j)] * b[(i, j)];
        }
    }
    s
}

pub fn max_abs(a: &Mat<f64>) -> f64 {
    let mut s: f64 = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            let v = a[(i, j)];
            if v.is_nan() {
                return f64::NAN;
            }
            s = s.max(v.abs());
        }
    }
    s
}

/// Lower Cholesky factor, or `None` if the matrix is not numerically PD.
pub fn cholesky_lower(a: &Mat<f64>) -> Option<Mat<f64>> {
    let llt = a.llt(Side::Lower).ok()?;
    let l = llt.L().to_owned();
    let ok = (0..l.nrows()).all(|i| l[(i, i)].is_finite() && l[(i, i)] > 0.0);
    ok.then_some(l)
}

/// Inverse of a symmetric PD matrix, symmetrized.
pub fn spd_inverse(a: &Mat<f64>) -> Option<Mat<f64>> {
    let llt = a.llt(Side::Lower).ok()?;
    let inv = llt.inverse();
    let inv = sym_part(&inv);
    let finite = (0..inv.ncols()).all(|j| (0..inv.nrows()).all(|i| inv[(i, j)].is_finite()));
    finite.then_some(inv)
}

/// Largest `alpha` with `X + alpha dX` PSD, given the lower Cholesky factor of `X`.
/// Returns `+inf` when every step length is admissible.
pub fn max_step(chol_x: &Mat<f64>, dx: &Mat<f64>) -> f64 {
    let n = dx.nrows();
    if n == 0 {
        return f64::INFINITY;
    }
    let mut w = dx.clone();
    solve_lower_triangular_in_place(chol_x.as_ref(), w.as_mut(), Par::Seq);
    let mut w = w.transpose().to_owned();
    solve_lower_triangular_in_place(chol_x.as_ref(), w.as_mut(), Par::Seq);
    let w = sym_part(&w);
    let lmin = min_eigenvalue(&w);
    if lmin.is_nan() {
        0.0
    } else if lmin >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lmin
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_to_boundary_of_identity() {
        let x = Mat::<f64>::identity(3, 3);
        let l = cholesky_lower(&x).unwrap();
        let dx = Mat::from_fn(3, 3, |i, j| if i == j { -2.0 } else { 0.0 });
        assert!((max_step(&l, &dx) - 0.5).abs() < 1e-14);
        let up = Mat::<f64>::identity(3, 3);
        assert_eq!(max_step(&l, &up), f64::INFINITY);
    }

    #[test]
    fn inverse_and_eigenvalues() {
        let a = Mat::from_fn(2, 2, |i, j| if i == j { 2.0 } else { 1.0 });
        let inv = spd_inverse(&a).unwrap();
        let prod = &a * &inv;
        for i in 0..2 {
            for j in 0..2 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((prod[(i, j)] - e).abs() < 1e-14);
            }
        }
        let ev = sym_eigenvalues(&a);
        assert!((ev[0] - 1.0).abs() < 1e-14 && (ev[1] - 3.0).abs() < 1e-14);
        assert!(cholesky_lower(&Mat::from_fn(2, 2, |i, j| if i == j { 1.0 } else { 2.0 })).is_none());
    }
}
