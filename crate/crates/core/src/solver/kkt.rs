//! Factorization of the augmented Schur system
//!
//! ```text
//! [ S   B ] [dy]   [r1]
//! [ B^T 0 ] [dx] = [rf]
//! ```
//!
//! `S` is positive semidefinite and `B` holds the free-variable columns. The
//! matrix is equilibrated, shifted into quasi-definite form by a small
//! `+rho / -rho` diagonal, and factored as `L D L^T`; callers refine against the
//! unshifted operator.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::cholesky::{ldlt, llt_pivoting};
use faer::{Conj, Mat, Par};

/// Pivots below this magnitude (or with the wrong sign) are replaced. Near the
/// optimum the Schur matrix is legitimately close to singular, so only true
/// breakdowns are touched.
const PIVOT_EPS: f64 = 1e-30;
const PIVOT_DELTA: f64 = 1e-20;

pub(crate) struct KktFactor {
    lower: Mat<f64>,
    scale: Vec<f64>,
}

/// Symmetric Ruiz equilibration: returns `d` with `diag(d) K diag(d)` having
/// row maxima close to one. Only the lower triangle of `k` is read.
fn ruiz(k: &Mat<f64>) -> Vec<f64> {
    let n = k.nrows();
    let mut d = vec![1.0; n];
    for _ in 0..8 {
        let mut rmax = vec![0.0f64; n];
        for j in 0..n {
            for i in j..n {
                let v = (d[i] * k[(i, j)] * d[j]).abs();
                rmax[i] = rmax[i].max(v);
                rmax[j] = rmax[j].max(v);
            }
        }
        let mut done = true;
        for i in 0..n {
            if rmax[i] > 0.0 {
                if (rmax[i] - 1.0).abs() > 1e-2 {
                    done = false;
                }
                d[i] /= rmax[i].sqrt();
            }
        }
        if done {
            break;
        }
    }
    d
}

impl KktFactor {
    /// Factors the matrix whose lower triangle is `k`; the first `m` indices
    /// are rows (positive block), the rest free variables (negative block).
    pub fn new(mut k: Mat<f64>, m: usize, rho: f64) -> Option<Self> {
        let n = k.nrows();
        let scale = ruiz(&k);
        for j in 0..n {
            for i in j..n {
                k[(i, j)] *= scale[i] * scale[j];
            }
            k[(j, j)] += if j < m { rho } else { -rho };
        }
        let signs: Vec<i8> = (0..n).map(|i| if i < m { 1 } else { -1 }).collect();
        let mut mem = MemBuffer::new(ldlt::factor::cholesky_in_place_scratch::<f64>(
            n,
            Par::Seq,
            Default::default(),
        ));
        ldlt::factor::cholesky_in_place(
            k.as_mut(),
            ldlt::factor::LdltRegularization {
                dynamic_regularization_signs: Some(&signs),
                dynamic_regularization_delta: PIVOT_DELTA,
                dynamic_regularization_epsilon: PIVOT_EPS,
            },
            Par::Seq,
            MemStack::new(&mut mem),
            Default::default(),
        )
        .ok()?;
        let finite = (0..n).all(|j| (j..n).all(|i| k[(i, j)].is_finite()));
        finite.then_some(Self { lower: k, scale })
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = rhs.len();
        let mut x = Mat::from_fn(n, 1, |i, _| rhs[i] * self.scale[i]);
        let mut mem = MemBuffer::new(ldlt::solve::solve_in_place_scratch::<f64>(n, 1, Par::Seq));
        ldlt::solve::solve_in_place_with_conj(
            self.lower.as_ref(),
            self.lower.diagonal(),
            Conj::No,
            x.as_mut(),
            Par::Seq,
            MemStack::new(&mut mem),
        );
        (0..n).map(|i| x[(i, 0)] * self.scale[i]).collect()
    }
}

/// Rows to drop so that the rest are numerically independent, found by a
/// pivoted Cholesky of the unit-diagonal scaling of the Gram matrix (lower
/// triangle read).
pub(crate) fn dependent_rows(mut gram: Mat<f64>, rel_tol: f64) -> Vec<usize> {
    let n = gram.nrows();
    if n == 0 {
        return Vec::new();
    }
    let scale: Vec<f64> = (0..n)
        .map(|i| {
            let g = gram[(i, i)];
            if g > 0.0 {
                1.0 / g.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    for j in 0..n {
        for i in j..n {
            gram[(i, j)] *= scale[i] * scale[j];
        }
    }
    let mut perm = vec![0usize; n];
    let mut perm_inv = vec![0usize; n];
    let mut mem = MemBuffer::new(llt_pivoting::factor::cholesky_in_place_scratch::<usize, f64>(
        n,
        Par::Seq,
        Default::default(),
    ));
    let rank = match llt_pivoting::factor::cholesky_in_place(
        gram.as_mut(),
        &mut perm,
        &mut perm_inv,
        Par::Seq,
        MemStack::new(&mut mem),
        Default::default(),
    ) {
        Ok((info, _)) => info.rank,
        Err(_) => return (0..n).collect(),
    };
    // pivots come out in decreasing order
    let rank = (0..rank).find(|&j| gram[(j, j)].powi(2) < rel_tol).unwrap_or(rank);
    let mut dropped: Vec<usize> = perm[rank..].to_vec();
    dropped.sort_unstable();
    dropped
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_saddle_point_system() {
        // S = [[2,1],[1,2]], B = [1,0]^T
        let k = Mat::from_fn(3, 3, |i, j| {
            let full = [[2.0, 1.0, 1.0], [1.0, 2.0, 0.0], [1.0, 0.0, 0.0]];
            full[i][j]
        });
        let f = KktFactor::new(k.clone(), 2, 1e-13).unwrap();
        let rhs = [1.0, 2.0, 3.0];
        let x = f.solve(&rhs);
        for i in 0..3 {
            let r: f64 = (0..3).map(|j| k[(i, j)] * x[j]).sum();
            assert!((r - rhs[i]).abs() < 1e-9, "row {i}: {r}");
        }
    }

    #[test]
    fn finds_dependent_rows() {
        // rows a, b, a + 2b, c
        let rows = [[1.0, 0.0, 1.0], [0.0, 1.0, 1.0], [1.0, 2.0, 3.0], [0.0, 0.0, 1.0]];
        let gram = Mat::from_fn(4, 4, |i, j| (0..3).map(|k| rows[i][k] * rows[j][k]).sum());
        let dropped = dependent_rows(gram, 1e-12);
        assert_eq!(dropped.len(), 1);
        assert!(dropped[0] < 3);
    }
}
