//! Elimination of rows that touch only free scalars.
//!
//! Such rows give zero rows in the Schur complement, so they are removed by
//! Gauss-Jordan elimination on the free columns before the interior-point
//! iterations. Rows left empty by the elimination are dependent: they are
//! dropped when consistent and reported otherwise.

use std::collections::{BTreeMap, BTreeSet};

/// A row's free-variable part.
pub(crate) type FreeRow = BTreeMap<usize, f64>;

#[derive(Debug)]
pub(crate) struct Presolved {
    /// Original ids of rows kept for the interior-point phase, ascending.
    pub kept_rows: Vec<usize>,
    /// Original ids of free scalars kept, ascending.
    pub kept_free: Vec<usize>,
    /// Modified free parts and right-hand sides of every row.
    pub free_rows: Vec<FreeRow>,
    pub rhs: Vec<f64>,
    /// Modified free objective.
    pub free_cost: Vec<f64>,
    pub obj_const: f64,
    /// `(row, var)` pivots; each pivot variable appears only in its row.
    pivots: Vec<(usize, usize)>,
    /// Row operations `row[target] -= factor * row[source]`, in order.
    ops: Vec<(usize, usize, f64)>,
    /// `nu` multiplier per pivot.
    nu: Vec<f64>,
    n_rows: usize,
    n_free: usize,
}

/// Failure of the presolve: an inconsistent dependent row or an unbounded free direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum PresolveError {
    InconsistentRow(usize),
    Unbounded(usize),
}

pub(crate) fn presolve(
    free_rows: Vec<FreeRow>,
    rhs: Vec<f64>,
    has_psd: &[bool],
    free_cost: Vec<f64>,
    n_free: usize,
) -> Result<Presolved, PresolveError> {
    let n_rows = rhs.len();
    let mut free_rows = free_rows;
    let mut rhs = rhs;
    let mut free_cost = free_cost;
    let rhs_scale = 1.0 + rhs.iter().fold(0.0f64, |a, v| a.max(v.abs()));

    let mut col_rows: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n_free];
    for (r, row) in free_rows.iter().enumerate() {
        for &k in row.keys() {
            col_rows[k].insert(r);
        }
    }

    let mut is_pivot_row = vec![false; n_rows];
    let mut pivots = Vec::new();
    let mut ops = Vec::new();
    let mut dropped = vec![false; n_rows];

    for r in 0..n_rows {
        if has_psd[r] {
            continue;
        }
        let row_max = free_rows[r].values().fold(0.0f64, |a, v| a.max(v.abs()));
        // entries this small relative to the row are cancellation residue
        let tiny = 1e-13 * row_max;
        let pivot = free_rows[r]
            .iter()
            .filter(|(_, v)| v.abs() > tiny)
            .fold(None::<(usize, f64)>, |best, (&k, &v)| match best {
                Some((_, bv)) if bv.abs() >= v.abs() => best,
                _ => Some((k, v)),
            });
        let Some((k, a_rk)) = pivot else {
            if rhs[r].abs() > 1e-9 * rhs_scale {
                return Err(PresolveError::InconsistentRow(r));
            }
            dropped[r] = true;
            continue;
        };
        free_rows[r].retain(|_, v| v.abs() > tiny);
        let source: Vec<(usize, f64)> = free_rows[r].iter().map(|(&j, &v)| (j, v)).collect();
        let source_rhs = rhs[r];
        let targets: Vec<usize> = col_rows[k].iter().copied().filter(|&i| i != r).collect();
        for i in targets {
            let factor = free_rows[i].get(&k).copied().unwrap_or(0.0) / a_rk;
            if factor == 0.0 {
                continue;
            }
            for &(j, a_rj) in &source {
                let entry = free_rows[i].entry(j).or_insert(0.0);
                *entry -= factor * a_rj;
                if j == k || *entry == 0.0 {
                    free_rows[i].remove(&j);
                    col_rows[j].remove(&i);
                } else {
                    col_rows[j].insert(i);
                }
            }
            rhs[i] -= factor * source_rhs;
            ops.push((i, r, factor));
        }
        is_pivot_row[r] = true;
        pivots.push((r, k));
    }

    let mut nu = Vec::with_capacity(pivots.len());
    let mut obj_const = 0.0;
    for &(r, k) in &pivots {
        let v = free_cost[k] / free_rows[r][&k];
        for (&j, &a) in &free_rows[r] {
            free_cost[j] -= v * a;
        }
        free_cost[k] = 0.0;
        obj_const += v * rhs[r];
        nu.push(v);
    }

    let pivot_vars: BTreeSet<usize> = pivots.iter().map(|&(_, k)| k).collect();
    let kept_rows: Vec<usize> = (0..n_rows)
        .filter(|&r| has_psd[r] && !is_pivot_row[r] && !dropped[r])
        .collect();
    let mut used = vec![false; n_free];
    for &r in &kept_rows {
        for &k in free_rows[r].keys() {
            used[k] = true;
        }
    }
    let mut kept_free = Vec::new();
    for k in 0..n_free {
        if pivot_vars.contains(&k) {
            continue;
        }
        if used[k] {
            kept_free.push(k);
        } else if free_cost[k].abs() > 1e-12 * (1.0 + free_cost[k].abs()) {
            return Err(PresolveError::Unbounded(k));
        }
    }

    Ok(Presolved {
        kept_rows,
        kept_free,
        free_rows,
        rhs,
        free_cost,
        obj_const,
        pivots,
        ops,
        nu,
        n_rows,
        n_free,
    })
}

impl Presolved {
    /// Full free-variable vector from the values of the kept free scalars.
    pub fn restore_free(&self, kept_values: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.n_free];
        for (&k, &v) in self.kept_free.iter().zip(kept_values) {
            x[k] = v;
        }
        for &(r, k) in &self.pivots {
            let row = &self.free_rows[r];
            let mut s = self.rhs[r];
            for (&j, &a) in row {
                if j != k {
                    s -= a * x[j];
                }
            }
            x[k] = s / row[&k];
        }
        x
    }

    /// Row multipliers of the original rows from those of the kept rows.
    pub fn restore_duals(&self, kept_duals: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_rows];
        for (&r, &v) in self.kept_rows.iter().zip(kept_duals) {
            y[r] = v;
        }
        for (&(r, _), &v) in self.pivots.iter().zip(&self.nu) {
            y[r] = v;
        }
        for &(target, source, factor) in self.ops.iter().rev() {
            y[source] -= factor * y[target];
        }
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(entries: &[(usize, f64)]) -> FreeRow {
        entries.iter().copied().collect()
    }

    #[test]
    fn eliminates_free_only_rows_and_recovers_solution() {
        // rows: x0 - x1 = 0 (free only), x1 + x2 = 3 (free only), PSD row with x0 + 2 x2
        let rows = vec![row(&[(0, 1.0), (1, -1.0)]), row(&[(1, 1.0), (2, 1.0)]), row(&[(0, 1.0), (2, 2.0)])];
        let rhs = vec![0.0, 3.0, 5.0];
        let has_psd = [false, false, true];
        let cost = vec![1.0, 0.0, 0.0];
        let p = presolve(rows.clone(), rhs, &has_psd, cost.clone(), 3).unwrap();
        assert_eq!(p.kept_rows, vec![2]);
        assert_eq!(p.kept_free.len(), 1);
        // pick the kept value so the PSD row reads 5 with PSD contribution 0
        let k = p.kept_free[0];
        let reduced = &p.free_rows[2];
        let v = (p.rhs[2]) / reduced[&k];
        let x = p.restore_free(&[v]);
        let dot = |r: &FreeRow| r.iter().map(|(&j, &a)| a * x[j]).sum::<f64>();
        assert!((dot(&rows[0]) - 0.0).abs() < 1e-12);
        assert!((dot(&rows[1]) - 3.0).abs() < 1e-12);
        assert!((dot(&rows[2]) - 5.0).abs() < 1e-12);
        // dual restoration satisfies B^T y = c for some multiplier on the kept row
        let y_kept = p.free_cost[k] / reduced[&k];
        let y = p.restore_duals(&[y_kept]);
        for j in 0..3 {
            let s: f64 = rows.iter().zip(&y).map(|(r, yi)| r.get(&j).copied().unwrap_or(0.0) * yi).sum();
            assert!((s - cost[j]).abs() < 1e-12, "column {j}: {s}");
        }
    }

    #[test]
    fn dependent_rows_are_dropped_or_rejected() {
        let rows = vec![row(&[(0, 1.0)]), row(&[(0, 2.0)]), FreeRow::new()];
        let ok = presolve(rows.clone(), vec![1.0, 2.0, 0.0], &[false, false, false], vec![0.0], 1).unwrap();
        assert!(ok.kept_rows.is_empty());
        assert_eq!(ok.restore_free(&[]), vec![1.0]);
        let bad = presolve(rows, vec![1.0, 3.0, 0.0], &[false, false, false], vec![0.0], 1);
        assert_eq!(bad.unwrap_err(), PresolveError::InconsistentRow(1));
    }

    #[test]
    fn unused_free_with_cost_is_unbounded() {
        let err = presolve(vec![FreeRow::new()], vec![0.0], &[true], vec![1.0], 1).unwrap_err();
        assert_eq!(err, PresolveError::Unbounded(0));
    }
}
