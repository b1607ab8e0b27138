//! Primal-dual interior-point solver for [`RealConicProgram`].
//!
//! Internally every program is brought to the minimization form
//!
//! ```text
//! min <C, X> + c_f^T x   s.t.  A(X) + B x = b,  X psd,  x free
//! max b^T y              s.t.  A*(y) + Z = C,  B^T y = c_f,  Z psd
//! ```
//!
//! Rows that touch only free scalars are eliminated first, rows that are
//! linearly dependent on others are set aside, and the rest is solved with an
//! infeasible-start Mehrotra predictor-corrector method using the HKM
//! direction. Free scalars stay in the Newton system, which is solved as a
//! symmetric quasi-definite saddle-point system.

mod kkt;
mod presolve;

use faer::linalg::solvers::{Llt, Solve};
use faer::{Mat, Side};

use crate::error::{Error, Result};
use crate::linalg::{cholesky_lower, frob_dot, max_abs, max_step, spd_inverse, sym_part};
use crate::program::{RealConicProgram, Residuals, Sense, SolveResult, SolveStatus, Var};

use kkt::KktFactor;
use presolve::{FreeRow, PresolveError};

/// Tolerances and step control of [`solve`].
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SolverOptions {
    pub tol_gap: f64,
    pub tol_primal: f64,
    pub tol_dual: f64,
    pub max_iter: usize,
    /// Fraction of the distance to the cone boundary taken by each step.
    pub step_fraction: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol_gap: 1e-8, tol_primal: 1e-8, tol_dual: 1e-8, max_iter: 200, step_fraction: 0.98 }
    }
}

impl SolverOptions {
    /// Same tolerance for gap, primal and dual residuals.
    pub fn with_tol(tol: f64) -> Self {
        Self { tol_gap: tol, tol_primal: tol, tol_dual: tol, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let tols = [self.tol_gap, self.tol_primal, self.tol_dual];
        if tols.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::Invalid("solver tolerances must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::Invalid("max_iter must be positive".into()));
        }
        if !(self.step_fraction > 0.0 && self.step_fraction < 1.0) {
            return Err(Error::Invalid("step_fraction must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// `(p, q, w)`: the data matrix holds `w` at `(p, q)` and `(q, p)`.
type Entry = (usize, usize, f64);

/// The program after presolve, in minimization form.
struct Reduced {
    dims: Vec<usize>,
    /// PSD part of each row, grouped by block.
    by_block: Vec<Vec<(usize, Vec<Entry>)>>,
    free: Vec<Vec<(usize, f64)>>,
    b: Vec<f64>,
    c: Vec<Mat<f64>>,
    cf: Vec<f64>,
    obj_const: f64,
}

impl Reduced {
    fn m(&self) -> usize {
        self.b.len()
    }

    fn nf(&self) -> usize {
        self.cf.len()
    }

    fn a_apply(&self, xs: &[Mat<f64>]) -> Vec<f64> {
        let mut out = vec![0.0; self.m()];
        for (blk, rows) in self.by_block.iter().enumerate() {
            let x = &xs[blk];
            for (r, ents) in rows {
                out[*r] += entries_dot(ents, x);
            }
        }
        out
    }

    fn at_apply(&self, y: &[f64]) -> Vec<Mat<f64>> {
        let mut out: Vec<Mat<f64>> = self.dims.iter().map(|&n| Mat::zeros(n, n)).collect();
        for (blk, rows) in self.by_block.iter().enumerate() {
            let o = &mut out[blk];
            for (r, ents) in rows {
                let v = y[*r];
                if v == 0.0 {
                    continue;
                }
                for &(p, q, w) in ents {
                    o[(p, q)] += v * w;
                    if p != q {
                        o[(q, p)] += v * w;
                    }
                }
            }
        }
        out
    }

    fn b_apply(&self, x: &[f64]) -> Vec<f64> {
        self.free.iter().map(|row| row.iter().map(|&(k, a)| a * x[k]).sum()).collect()
    }

    fn bt_apply(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.nf()];
        for (row, &v) in self.free.iter().zip(y) {
            for &(k, a) in row {
                out[k] += a * v;
            }
        }
        out
    }

    /// Lower triangle of the Schur matrix `S_ij = tr(A_i X A_j Zinv)`.
    /// The matrix is bordered by `extra` zero rows and columns.
    fn schur(&self, xs: &[Mat<f64>], zis: &[Mat<f64>], extra: usize) -> Mat<f64> {
        let m = self.m() + extra;
        let mut s = Mat::<f64>::zeros(m, m);
        for (blk, rows) in self.by_block.iter().enumerate() {
            let n = self.dims[blk];
            let (x, zi) = (&xs[blk], &zis[blk]);
            let mut pos = vec![usize::MAX; n];
            for (jpos, (j, ents_j)) in rows.iter().enumerate() {
                // G = X A_j Zinv, through the rows of A_j Zinv that are nonzero
                let mut support = Vec::new();
                for &(p, q, _) in ents_j {
                    for t in [p, q] {
                        if pos[t] == usize::MAX {
                            pos[t] = support.len();
                            support.push(t);
                        }
                    }
                }
                let k = support.len();
                let mut w_rows = Mat::<f64>::zeros(k, n);
                for &(p, q, w) in ents_j {
                    for c in 0..n {
                        w_rows[(pos[p], c)] += w * zi[(q, c)];
                    }
                    if p != q {
                        for c in 0..n {
                            w_rows[(pos[q], c)] += w * zi[(p, c)];
                        }
                    }
                }
                let x_cols = Mat::from_fn(n, k, |a, t| x[(a, support[t])]);
                let g = &x_cols * &w_rows;
                for &t in &support {
                    pos[t] = usize::MAX;
                }
                for (i, ents_i) in &rows[jpos..] {
                    s[(*i, *j)] += entries_dot(ents_i, &g);
                }
            }
        }
        s
    }

    /// `A(X M Zinv)` for `M = A*(v)`.
    fn schur_apply(&self, xs: &[Mat<f64>], zis: &[Mat<f64>], v: &[f64]) -> Vec<f64> {
        let ms = self.at_apply(v);
        let prods: Vec<Mat<f64>> = ms
            .iter()
            .zip(xs.iter().zip(zis))
            .map(|(mb, (x, zi))| x * mb * zi)
            .collect();
        self.a_apply(&prods)
    }
}

/// `<A, X>` for the symmetric data matrix given by `ents` (X need not be symmetric).
fn entries_dot(ents: &[Entry], x: &Mat<f64>) -> f64 {
    ents.iter()
        .map(|&(p, q, w)| if p == q { w * x[(p, p)] } else { w * (x[(p, q)] + x[(q, p)]) })
        .sum()
}

/// Infinity norm; NaN if any entry is NaN.
fn vec_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| if a.is_nan() || x.is_nan() { f64::NAN } else { a.max(x.abs()) })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Clone)]
struct Iterate {
    x: Vec<Mat<f64>>,
    xf: Vec<f64>,
    y: Vec<f64>,
    z: Vec<Mat<f64>>,
}

struct Direction {
    dx: Vec<Mat<f64>>,
    dxf: Vec<f64>,
    dy: Vec<f64>,
    dz: Vec<Mat<f64>>,
}

/// Internal outcome before postsolve.
/// Iterations without halving the residual score before giving up, counted
/// once the score is within `NEAR_TOL` of the tolerances.
const NO_PROGRESS_LIMIT: usize = 6;
const NEAR_TOL: f64 = 100.0;

/// Quasi-definite shifts for the Newton system, tried in order while the
/// interior point method breaks down numerically.
const KKT_SHIFTS: [f64; 3] = [1e-13, 1e-14, 3e-13];

struct Outcome {
    status: SolveStatus,
    it: Iterate,
    iterations: usize,
}

/// Solves `prog`. Input errors are returned as `Err`; every solver outcome,
/// including failure to converge, is reported through [`SolveResult::status`].
pub fn solve(prog: &RealConicProgram, opts: &SolverOptions) -> Result<SolveResult> {
    prog.validate()?;
    opts.validate()?;
    let sign = match prog.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let n_rows = prog.n_rows();

    // internal objective
    let mut c: Vec<Mat<f64>> = prog.psd_blocks.iter().map(|&n| Mat::zeros(n, n)).collect();
    let mut cf = vec![0.0; prog.n_free];
    for &(var, v) in prog.objective.terms() {
        match var {
            Var::Psd { block, i, j } => {
                c[block][(i, j)] += sign * v;
                if i != j {
                    c[block][(j, i)] += sign * v;
                }
            }
            Var::Free(k) => cf[k] += sign * v,
        }
    }

    let mut free_rows: Vec<FreeRow> = Vec::with_capacity(n_rows);
    let mut has_psd = Vec::with_capacity(n_rows);
    for row in &prog.rows {
        let mut fr = FreeRow::new();
        let mut psd = false;
        for &(var, v) in row.form.terms() {
            match var {
                Var::Free(k) => {
                    fr.insert(k, v);
                }
                Var::Psd { .. } => psd = true,
            }
        }
        free_rows.push(fr);
        has_psd.push(psd);
    }
    let rhs: Vec<f64> = prog.rows.iter().map(|r| r.rhs).collect();

    let pre = match presolve::presolve(free_rows, rhs, &has_psd, cf.clone(), prog.n_free) {
        Ok(p) => p,
        Err(PresolveError::InconsistentRow(_)) | Err(PresolveError::Unbounded(_)) => {
            return Ok(failure(prog, SolveStatus::Infeasible));
        }
    };

    let build = |rows: &[usize], frees: &[usize]| -> Reduced {
        let mut free_local = vec![usize::MAX; prog.n_free];
        for (l, &k) in frees.iter().enumerate() {
            free_local[k] = l;
        }
        let mut by_block: Vec<Vec<(usize, Vec<Entry>)>> = vec![Vec::new(); prog.psd_blocks.len()];
        let mut free = Vec::with_capacity(rows.len());
        let mut b = Vec::with_capacity(rows.len());
        for (local, &r) in rows.iter().enumerate() {
            let mut per_block: Vec<(usize, Vec<Entry>)> = Vec::new();
            for &(var, v) in prog.rows[r].form.terms() {
                if let Var::Psd { block, i, j } = var {
                    match per_block.last_mut() {
                        Some((bb, ents)) if *bb == block => ents.push((i, j, v)),
                        _ => per_block.push((block, vec![(i, j, v)])),
                    }
                }
            }
            for (block, ents) in per_block {
                by_block[block].push((local, ents));
            }
            free.push(
                pre.free_rows[r]
                    .iter()
                    .filter(|(k, _)| free_local[**k] != usize::MAX)
                    .map(|(&k, &a)| (free_local[k], a))
                    .collect(),
            );
            b.push(pre.rhs[r]);
        }
        Reduced {
            dims: prog.psd_blocks.clone(),
            by_block,
            free,
            b,
            c: c.clone(),
            cf: frees.iter().map(|&k| pre.free_cost[k]).collect(),
            obj_const: pre.obj_const,
        }
    };

    // free columns that are combinations of others are fixed at zero
    let dependent_cols = dependent_free_columns(&build(&pre.kept_rows, &pre.kept_free));
    let ipm_free: Vec<usize> = (0..pre.kept_free.len())
        .filter(|l| dependent_cols.binary_search(l).is_err())
        .collect();
    let frees: Vec<usize> = ipm_free.iter().map(|&l| pre.kept_free[l]).collect();

    let candidate = build(&pre.kept_rows, &frees);
    let dependent = dependent_local_rows(&candidate);
    let (red, ipm_rows) = if dependent.is_empty() {
        (candidate, pre.kept_rows.clone())
    } else {
        let rows: Vec<usize> = pre
            .kept_rows
            .iter()
            .enumerate()
            .filter(|(l, _)| dependent.binary_search(l).is_err())
            .map(|(_, &r)| r)
            .collect();
        (build(&rows, &frees), rows)
    };

    let outcome = if red.dims.is_empty() {
        Outcome {
            status: SolveStatus::Optimal,
            it: Iterate { x: Vec::new(), xf: vec![0.0; red.nf()], y: vec![0.0; red.m()], z: Vec::new() },
            iterations: 0,
        }
    } else {
        let norms = Norms::of(prog, &c, &cf);
        let mut outcome = ipm(&red, opts, &norms, KKT_SHIFTS[0]);
        for &rho in &KKT_SHIFTS[1..] {
            if outcome.status != SolveStatus::Numerical {
                break;
            }
            let retry = ipm(&red, opts, &norms, rho);
            if retry.status == SolveStatus::Optimal {
                outcome = retry;
            }
        }
        outcome
    };

    // postsolve
    let it = outcome.it;
    let mut xf_kept = vec![0.0; pre.kept_free.len()];
    for (&l, &v) in ipm_free.iter().zip(&it.xf) {
        xf_kept[l] = v;
    }
    let xfull = pre.restore_free(&xf_kept);
    let mut y_kept = vec![0.0; pre.kept_rows.len()];
    let mut cursor = 0;
    for (l, &r) in pre.kept_rows.iter().enumerate() {
        if cursor < ipm_rows.len() && ipm_rows[cursor] == r {
            y_kept[l] = it.y[cursor];
            cursor += 1;
        }
    }
    let y_int = pre.restore_duals(&y_kept);
    let blocks: Vec<Mat<f64>> = it.x.iter().map(sym_part).collect();

    let p_int: f64 = c.iter().zip(&blocks).map(|(cb, xb)| frob_dot(cb, xb)).sum::<f64>() + dot(&cf, &xfull);
    let d_int = dot(&rhs_of(prog), &y_int);
    let residuals = original_residuals(prog, &c, &cf, &blocks, &xfull, &y_int, &it.z, p_int, d_int);
    let mut status = outcome.status;
    if status == SolveStatus::Optimal
        && !(residuals.primal_inf <= opts.tol_primal
            && residuals.dual_inf <= opts.tol_dual
            && residuals.gap <= opts.tol_gap)
    {
        status = SolveStatus::Numerical;
    }

    Ok(SolveResult {
        status,
        objective: sign * p_int,
        dual_objective: sign * d_int,
        primal_blocks: blocks,
        free_values: xfull,
        dual_row_values: y_int.iter().map(|v| sign * v).collect(),
        residuals,
        iterations: outcome.iterations,
    })
}

fn rhs_of(prog: &RealConicProgram) -> Vec<f64> {
    prog.rows.iter().map(|r| r.rhs).collect()
}

/// Normalizing constants taken from the original data.
struct Norms {
    b: f64,
    c: f64,
}

impl Norms {
    fn of(prog: &RealConicProgram, c: &[Mat<f64>], cf: &[f64]) -> Self {
        let cn = c.iter().map(max_abs).fold(vec_inf(cf), f64::max);
        Self { b: vec_inf(&rhs_of(prog)), c: cn }
    }
}

#[allow(clippy::too_many_arguments)]
fn original_residuals(
    prog: &RealConicProgram,
    c: &[Mat<f64>],
    cf: &[f64],
    blocks: &[Mat<f64>],
    xfull: &[f64],
    y: &[f64],
    z: &[Mat<f64>],
    p: f64,
    d: f64,
) -> Residuals {
    let norms = Norms::of(prog, c, cf);
    let mut rp = 0.0f64;
    for row in &prog.rows {
        rp = rp.max((row.rhs - row.form.eval(blocks, xfull)).abs());
    }
    let mut rd: Vec<Mat<f64>> = c.to_vec();
    let mut rf = cf.to_vec();
    for (row, &v) in prog.rows.iter().zip(y) {
        for &(var, a) in row.form.terms() {
            match var {
                Var::Psd { block, i, j } => {
                    rd[block][(i, j)] -= v * a;
                    if i != j {
                        rd[block][(j, i)] -= v * a;
                    }
                }
                Var::Free(k) => rf[k] -= v * a,
            }
        }
    }
    let mut dres = vec_inf(&rf);
    for (rb, zb) in rd.iter().zip(z) {
        dres = dres.max(max_abs(&(rb - zb)));
    }
    Residuals {
        primal_inf: rp / (1.0 + norms.b),
        dual_inf: dres / (1.0 + norms.c),
        gap: (p - d).abs() / (1.0 + p.abs()),
    }
}

/// Result for programs rejected before the interior-point phase.
fn failure(prog: &RealConicProgram, status: SolveStatus) -> SolveResult {
    SolveResult {
        status,
        objective: f64::NAN,
        dual_objective: f64::NAN,
        primal_blocks: prog.psd_blocks.iter().map(|&n| Mat::zeros(n, n)).collect(),
        free_values: vec![0.0; prog.n_free],
        dual_row_values: vec![0.0; prog.n_rows()],
        residuals: Residuals { primal_inf: f64::INFINITY, dual_inf: f64::INFINITY, gap: f64::INFINITY },
        iterations: 0,
    }
}

/// Local indices of rows dependent on earlier rows, from the Gram matrix of
/// the full row vectors (PSD and free parts).
fn dependent_free_columns(red: &Reduced) -> Vec<usize> {
    let nf = red.nf();
    if nf == 0 {
        return Vec::new();
    }
    let mut gram = Mat::<f64>::zeros(nf, nf);
    for row in &red.free {
        for (t, &(i, ai)) in row.iter().enumerate() {
            for &(j, aj) in &row[..=t] {
                gram[(i.max(j), i.min(j))] += ai * aj;
            }
        }
    }
    kkt::dependent_rows(gram, 1e-11)
}

/// Lower triangle of `[A B][A B]^T`.
fn row_gram(red: &Reduced) -> Mat<f64> {
    let ids: Vec<Mat<f64>> = red.dims.iter().map(|&n| Mat::identity(n, n)).collect();
    let mut gram = red.schur(&ids, &ids, 0);
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); red.nf()];
    for (r, row) in red.free.iter().enumerate() {
        for &(k, a) in row {
            cols[k].push((r, a));
        }
    }
    for col in &cols {
        for (t, &(i, ai)) in col.iter().enumerate() {
            for &(j, aj) in &col[..=t] {
                gram[(i.max(j), i.min(j))] += ai * aj;
            }
        }
    }
    gram
}

fn dependent_local_rows(red: &Reduced) -> Vec<usize> {
    if red.m() == 0 {
        return Vec::new();
    }
    kkt::dependent_rows(row_gram(red), 1e-13)
}

/// Least-norm correction of a direction onto `A(dX) + B dx = r`.
struct RowProjector {
    llt: Llt<f64>,
}

impl RowProjector {
    fn new(red: &Reduced) -> Option<Self> {
        if red.m() == 0 {
            return None;
        }
        row_gram(red).llt(Side::Lower).ok().map(|llt| Self { llt })
    }

    fn apply(&self, red: &Reduced, target: &[f64], dx: &mut [Mat<f64>], dxf: &mut [f64]) {
        let ax = red.a_apply(dx);
        let bx = red.b_apply(dxf);
        let err = Mat::from_fn(red.m(), 1, |i, _| target[i] - ax[i] - bx[i]);
        let w = self.llt.solve(&err);
        let w: Vec<f64> = (0..red.m()).map(|i| w[(i, 0)]).collect();
        if w.iter().any(|v| !v.is_finite()) {
            return;
        }
        for (d, a) in dx.iter_mut().zip(red.at_apply(&w)) {
            *d += &a;
        }
        for (d, b) in dxf.iter_mut().zip(red.bt_apply(&w)) {
            *d += b;
        }
    }
}

fn ipm(red: &Reduced, opts: &SolverOptions, norms: &Norms, rho: f64) -> Outcome {
    let projector = RowProjector::new(red);
    let m = red.m();
    let nf = red.nf();
    let n_total: usize = red.dims.iter().sum();
    let nt = n_total as f64;

    // identity-scaled start sized from the data
    let mut a_norm = vec![0.0f64; m];
    for rows in &red.by_block {
        for (r, ents) in rows {
            for &(p, q, w) in ents {
                a_norm[*r] += if p == q { w * w } else { 2.0 * w * w };
            }
        }
    }
    for (r, row) in red.free.iter().enumerate() {
        a_norm[r] += row.iter().map(|&(_, a)| a * a).sum::<f64>();
    }
    let a_norm: Vec<f64> = a_norm.into_iter().map(f64::sqrt).collect();
    let alpha = (0..m)
        .map(|i| (1.0 + red.b[i].abs()) / (1.0 + a_norm[i]))
        .fold(1.0f64, f64::max)
        * nt;
    let c_norm = red.c.iter().map(|cb| frob_dot(cb, cb)).sum::<f64>().sqrt();
    let beta = (1.0 + a_norm.iter().copied().fold(c_norm, f64::max)) / nt.sqrt();
    let mut it = Iterate {
        x: red.dims.iter().map(|&n| scaled_identity(n, 10.0 * alpha)).collect(),
        xf: vec![0.0; nf],
        y: vec![0.0; m],
        z: red.dims.iter().map(|&n| scaled_identity(n, 10.0 * beta)).collect(),
    };

    let mut best: Option<(f64, Iterate)> = None;
    let mut stalls = 0;
    // score at the last halving, and iterations since
    let mut mark = f64::INFINITY;
    let mut since_mark = 0;
    let blowup = 1e12 * (1.0 + norms.b + norms.c);
    let tol_scale = |pinf: f64, dinf: f64, gap: f64| {
        (pinf / opts.tol_primal).max(dinf / opts.tol_dual).max(gap / opts.tol_gap)
    };

    for iter in 0..opts.max_iter {
        // residuals
        let ax = red.a_apply(&it.x);
        let bx = red.b_apply(&it.xf);
        let rp: Vec<f64> = (0..m).map(|i| red.b[i] - ax[i] - bx[i]).collect();
        let aty = red.at_apply(&it.y);
        let rd: Vec<Mat<f64>> =
            (0..red.dims.len()).map(|k| &red.c[k] - &aty[k] - &it.z[k]).collect();
        let bty = red.bt_apply(&it.y);
        let rf: Vec<f64> = (0..nf).map(|k| red.cf[k] - bty[k]).collect();
        let p_obj = red.c.iter().zip(&it.x).map(|(cb, xb)| frob_dot(cb, xb)).sum::<f64>()
            + dot(&red.cf, &it.xf)
            + red.obj_const;
        let d_obj = dot(&red.b, &it.y) + red.obj_const;
        let pinf = vec_inf(&rp) / (1.0 + norms.b);
        let dinf = rd.iter().map(max_abs).fold(vec_inf(&rf), f64::max) / (1.0 + norms.c);
        let gap = (p_obj - d_obj).abs() / (1.0 + p_obj.abs());
        let score = tol_scale(pinf, dinf, gap);
        if !score.is_finite() {
            return finish(best, it, SolveStatus::Numerical, iter);
        }
        if best.as_ref().is_none_or(|(s, _)| score < *s) {
            best = Some((score, it.clone()));
        }
        if score < 0.5 * mark {
            mark = score;
            since_mark = 0;
        } else if score <= NEAR_TOL {
            since_mark += 1;
            if since_mark >= NO_PROGRESS_LIMIT {
                return finish(best, it, SolveStatus::Numerical, iter);
            }
        }
        if score <= 1.0 {
            return Outcome { status: SolveStatus::Optimal, it, iterations: iter };
        }
        let x_big = it.x.iter().map(max_abs).fold(vec_inf(&it.xf), f64::max);
        if x_big > blowup || vec_inf(&it.y) > blowup {
            return Outcome { status: SolveStatus::Infeasible, it, iterations: iter };
        }

        let mu = it.x.iter().zip(&it.z).map(|(x, z)| frob_dot(x, z)).sum::<f64>() / nt;
        let zis: Option<Vec<Mat<f64>>> = it.z.iter().map(spd_inverse).collect();
        let chol_x: Option<Vec<Mat<f64>>> = it.x.iter().map(cholesky_lower).collect();
        let chol_z: Option<Vec<Mat<f64>>> = it.z.iter().map(cholesky_lower).collect();
        let (Some(zis), Some(chol_x), Some(chol_z)) = (zis, chol_x, chol_z) else {
            return finish(best, it, SolveStatus::Numerical, iter);
        };

        let mut k = red.schur(&it.x, &zis, nf);
        for (r, row) in red.free.iter().enumerate() {
            for &(f, a) in row {
                k[(m + f, r)] += a;
            }
        }
        let Some(factor) = KktFactor::new(k, m, rho) else {
            return finish(best, it, SolveStatus::Numerical, iter);
        };

        let xrdzi: Vec<Mat<f64>> =
            (0..red.dims.len()).map(|b| &it.x[b] * &rd[b] * &zis[b]).collect();
        let direction = |sigma: f64, corr: Option<&[Mat<f64>]>| -> Direction {
            let t: Vec<Mat<f64>> = (0..red.dims.len())
                .map(|b| {
                    let mut t = &zis[b] * (sigma * mu) - &it.x[b] - &xrdzi[b];
                    if let Some(cr) = corr {
                        t -= &cr[b];
                    }
                    t
                })
                .collect();
            let at = red.a_apply(&t);
            let mut rhs: Vec<f64> = (0..m).map(|i| rp[i] - at[i]).collect();
            rhs.extend_from_slice(&rf);
            let sol = refine(red, &factor, &it.x, &zis, &rhs);
            let (dy, dxf) = sol.split_at(m);
            let atdy = red.at_apply(dy);
            let dz: Vec<Mat<f64>> = (0..red.dims.len()).map(|b| &rd[b] - &atdy[b]).collect();
            let mut dx: Vec<Mat<f64>> = (0..red.dims.len())
                .map(|b| sym_part(&(&t[b] + &it.x[b] * &atdy[b] * &zis[b])))
                .collect();
            let mut dxf = dxf.to_vec();
            if let Some(pr) = &projector {
                pr.apply(red, &rp, &mut dx, &mut dxf);
            }
            Direction { dx, dxf, dy: dy.to_vec(), dz }
        };
        let steps = |d: &Direction| -> (f64, f64) {
            let ap = chol_x.iter().zip(&d.dx).map(|(l, dx)| max_step(l, dx)).fold(f64::INFINITY, f64::min);
            let ad = chol_z.iter().zip(&d.dz).map(|(l, dz)| max_step(l, dz)).fold(f64::INFINITY, f64::min);
            ((opts.step_fraction * ap).min(1.0), (opts.step_fraction * ad).min(1.0))
        };

        let pred = direction(0.0, None);
        let (ap, ad) = steps(&pred);
        let mu_aff = (0..red.dims.len())
            .map(|b| frob_dot(&(&it.x[b] + &pred.dx[b] * ap), &(&it.z[b] + &pred.dz[b] * ad)))
            .sum::<f64>()
            / nt;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);
        let corr: Vec<Mat<f64>> =
            (0..red.dims.len()).map(|b| &pred.dx[b] * &pred.dz[b] * &zis[b]).collect();
        let dir = direction(sigma, Some(&corr));
        let (ap, ad) = steps(&dir);
        let finite = dir.dx.iter().chain(&dir.dz).all(|b| max_abs(b).is_finite())
            && vec_inf(&dir.dy).is_finite()
            && vec_inf(&dir.dxf).is_finite();
        if !(finite && ap.is_finite() && ad.is_finite()) {
            return finish(best, it, SolveStatus::Numerical, iter);
        }

        for b in 0..red.dims.len() {
            it.x[b] = sym_part(&(&it.x[b] + &dir.dx[b] * ap));
            it.z[b] = sym_part(&(&it.z[b] + &dir.dz[b] * ad));
        }
        for (v, d) in it.xf.iter_mut().zip(&dir.dxf) {
            *v += ap * d;
        }
        for (v, d) in it.y.iter_mut().zip(&dir.dy) {
            *v += ad * d;
        }
        if ap.max(ad) < 1e-8 {
            stalls += 1;
            if stalls >= 3 {
                return finish(best, it, SolveStatus::Numerical, iter + 1);
            }
        } else {
            stalls = 0;
        }
    }
    finish(best, it, SolveStatus::MaxIter, opts.max_iter)
}

fn finish(best: Option<(f64, Iterate)>, it: Iterate, status: SolveStatus, iterations: usize) -> Outcome {
    let it = best.map(|(_, b)| b).unwrap_or(it);
    Outcome { status, it, iterations }
}

fn scaled_identity(n: usize, v: f64) -> Mat<f64> {
    Mat::from_fn(n, n, |i, j| if i == j { v } else { 0.0 })
}

/// Solves the Newton system with the factor and refines against the exact operator.
fn refine(red: &Reduced, factor: &KktFactor, xs: &[Mat<f64>], zis: &[Mat<f64>], rhs: &[f64]) -> Vec<f64> {
    let m = red.m();
    let apply = |v: &[f64]| -> Vec<f64> {
        let (vy, vx) = v.split_at(m);
        let sv = red.schur_apply(xs, zis, vy);
        let bv = red.b_apply(vx);
        let mut out: Vec<f64> = (0..m).map(|i| sv[i] + bv[i]).collect();
        out.extend(red.bt_apply(vy));
        out
    };
    let scale = 1.0 + vec_inf(rhs);
    let mut sol = factor.solve(rhs);
    let mut res: Vec<f64> = rhs.iter().zip(apply(&sol)).map(|(r, a)| r - a).collect();
    let mut res_norm = vec_inf(&res);
    for _ in 0..4 {
        if res_norm <= 1e-15 * scale {
            break;
        }
        let corr = factor.solve(&res);
        let cand: Vec<f64> = sol.iter().zip(&corr).map(|(s, c)| s + c).collect();
        let cand_res: Vec<f64> = rhs.iter().zip(apply(&cand)).map(|(r, a)| r - a).collect();
        let cand_norm = vec_inf(&cand_res);
        if !(cand_norm < res_norm) {
            break;
        }
        sol = cand;
        res = cand_res;
        res_norm = cand_norm;
    }
    sol
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program::{FormBuilder, Row};

    fn row(f: impl FnOnce(&mut FormBuilder), rhs: f64) -> Row {
        let mut b = FormBuilder::new();
        f(&mut b);
        Row { form: b.build(), rhs }
    }

    #[test]
    fn trace_constrained_maximum_entry() {
        let mut obj = FormBuilder::new();
        obj.add_psd_entry(0, 0, 0, 1.0);
        let prog = RealConicProgram {
            psd_blocks: vec![2],
            n_free: 0,
            rows: vec![row(|b| {
                b.add_psd_entry(0, 0, 0, 1.0).add_psd_entry(0, 1, 1, 1.0);
            }, 1.0)],
            objective: obj.build(),
            sense: Sense::Maximize,
        };
        let res = solve(&prog, &SolverOptions::default()).unwrap();
        assert_eq!(res.status, SolveStatus::Optimal, "{res:?}");
        assert!((res.objective - 1.0).abs() < 1e-7);
        assert!((res.dual_row_values[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn free_scalar_on_determinant_boundary() {
        let mut obj = FormBuilder::new();
        obj.add(Var::Free(0), 1.0);
        let prog = RealConicProgram {
            psd_blocks: vec![2],
            n_free: 1,
            rows: vec![
                row(|b| {
                    b.add_psd_entry(0, 0, 1, 1.0);
                }, 1.0),
                row(|b| {
                    b.add_psd_entry(0, 0, 0, 1.0).add(Var::Free(0), -1.0);
                }, 0.0),
                row(|b| {
                    b.add_psd_entry(0, 1, 1, 1.0).add(Var::Free(0), -1.0);
                }, 0.0),
            ],
            objective: obj.build(),
            sense: Sense::Minimize,
        };
        let res = solve(&prog, &SolverOptions::default()).unwrap();
        assert_eq!(res.status, SolveStatus::Optimal, "{res:?}");
        assert!((res.objective - 1.0).abs() < 1e-7, "{}", res.objective);
        assert!((res.free_values[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn duplicated_row_is_tolerated() {
        let mut obj = FormBuilder::new();
        obj.add_psd_entry(0, 0, 0, 1.0);
        let r = row(|b| {
            b.add_psd_entry(0, 0, 0, 1.0).add_psd_entry(0, 1, 1, 1.0);
        }, 1.0);
        let prog = RealConicProgram {
            psd_blocks: vec![2],
            n_free: 0,
            rows: vec![r.clone(), r],
            objective: obj.build(),
            sense: Sense::Maximize,
        };
        let res = solve(&prog, &SolverOptions::default()).unwrap();
        assert_eq!(res.status, SolveStatus::Optimal, "{res:?}");
        assert!((res.objective - 1.0).abs() < 1e-7);
    }

    #[test]
    fn inconsistent_free_rows_are_infeasible() {
        let prog = RealConicProgram {
            psd_blocks: vec![1],
            n_free: 1,
            rows: vec![
                row(|b| {
                    b.add(Var::Free(0), 1.0);
                }, 1.0),
                row(|b| {
                    b.add(Var::Free(0), 2.0);
                }, 3.0),
            ],
            objective: FormBuilder::new().build(),
            sense: Sense::Minimize,
        };
        let res = solve(&prog, &SolverOptions::default()).unwrap();
        assert_eq!(res.status, SolveStatus::Infeasible);
    }

    #[test]
    fn options_are_validated() {
        let mut o = SolverOptions::default();
        o.step_fraction = 1.0;
        assert!(o.validate().is_err());
        assert!(SolverOptions::with_tol(1e-6).validate().is_ok());
    }
}
