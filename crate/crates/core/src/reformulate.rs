//! Real reformulations of a [`ComplexSDP`].
//!
//! Two primal forms are provided. The embedding form works on
//! `Y = [H_R, -H_I; H_I, H_R]` and needs the structural rows that pin down that
//! block pattern. The dual-view form works on an unstructured
//! `X = [X1, X3; X3^T, X2]` through `H_R = X1 + X2` and `H_I = X3 - X3^T`,
//! needs no structural rows, and has the same optimum.

use num_complex::Complex64;

use crate::complex::{ComplexMatrix, ComplexSDP, HermitianMatrix};
use crate::program::{FormBuilder, LinearForm, RealConicProgram, Row, Sense, Var};

/// Which real reformulation to emit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Form {
    /// `Y = [H_R, -H_I; H_I, H_R]` plus structural rows.
    Naive,
    /// `H = (X1 + X2) + (X3 - X3^T) i`, no structural rows.
    Dualview,
}

impl std::fmt::Display for Form {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Form::Naive => "naive",
            Form::Dualview => "dualview",
        })
    }
}

impl std::str::FromStr for Form {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "naive" => Ok(Form::Naive),
            "dualview" => Ok(Form::Dualview),
            other => Err(format!("unknown form {other:?} (expected naive|dualview)")),
        }
    }
}

/// A real symmetric matrix variable: a PSD block or a run of free scalars
/// holding an upper triangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymVar {
    Psd { block: usize },
    /// Free scalars at `offset..offset + dim*(dim+1)/2`, upper triangle
    /// packed column by column.
    Free { offset: usize, dim: usize },
}

impl SymVar {
    /// Number of free scalars in a packed upper triangle.
    pub fn packed_len(dim: usize) -> usize {
        dim * (dim + 1) / 2
    }

    /// Adds `coef * V[r, c]`.
    pub fn add_entry(&self, form: &mut FormBuilder, r: usize, c: usize, coef: f64) {
        match *self {
            SymVar::Psd { block } => {
                form.add_psd_entry(block, r, c, coef);
            }
            SymVar::Free { offset, dim } => {
                let (i, j) = if r <= c { (r, c) } else { (c, r) };
                debug_assert!(j < dim);
                form.add(Var::Free(offset + j * (j + 1) / 2 + i), coef);
            }
        }
    }
}

/// How a Hermitian `n x n` unknown `H = H_R + H_I i` is carried by real variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HermitianVar {
    /// `V = [H_R, -H_I; H_I, H_R]` with `H_R = V11`, `H_I = V21`.
    Embedded { var: SymVar, n: usize },
    /// PSD block `X`, `H_R = X1 + X2`, `H_I = X3 - X3^T`.
    DualView { block: usize, n: usize },
    /// Free packed symmetric `P` and free packed strictly-upper antisymmetric `Q`:
    /// `H_R = P`, `H_I = Q`.
    Free { re_offset: usize, im_offset: usize, n: usize },
}

impl HermitianVar {
    pub fn dim(&self) -> usize {
        match *self {
            HermitianVar::Embedded { n, .. }
            | HermitianVar::DualView { n, .. }
            | HermitianVar::Free { n, .. } => n,
        }
    }

    /// Number of free scalars needed by `HermitianVar::Free` of dimension `n`.
    pub fn free_len(n: usize) -> usize {
        n * n
    }

    /// Adds `coef * H_R[p, q]`.
    pub fn add_re(&self, form: &mut FormBuilder, p: usize, q: usize, coef: f64) {
        match *self {
            HermitianVar::Embedded { var, .. } => var.add_entry(form, p, q, coef),
            HermitianVar::DualView { block, n } => {
                form.add_psd_entry(block, p, q, coef);
                form.add_psd_entry(block, n + p, n + q, coef);
            }
            HermitianVar::Free { re_offset, n, .. } => {
                SymVar::Free {
                    offset: re_offset,
                    dim: n,
                }
                .add_entry(form, p, q, coef);
            }
        }
    }

    /// Adds `coef * H_I[p, q]`.
    pub fn add_im(&self, form: &mut FormBuilder, p: usize, q: usize, coef: f64) {
        match *self {
            HermitianVar::Embedded { var, n } => var.add_entry(form, n + p, q, coef),
            HermitianVar::DualView { block, n } => {
                form.add_psd_entry(block, p, n + q, coef);
                form.add_psd_entry(block, q, n + p, -coef);
            }
            HermitianVar::Free { im_offset, .. } => {
                if p != q {
                    let (i, j, sign) = if p < q { (p, q, 1.0) } else { (q, p, -1.0) };
                    // strictly upper triangle packed column by column
                    form.add(Var::Free(im_offset + j * (j - 1) / 2 + i), sign * coef);
                }
            }
        }
    }

    /// Adds the real and imaginary parts of `a * H[p, q]` to `re_form` and
    /// `im_form`, i.e. one term of `<A, H>`.
    pub fn add_product(
        &self,
        re_form: &mut FormBuilder,
        im_form: &mut FormBuilder,
        p: usize,
        q: usize,
        a: Complex64,
    ) {
        self.add_re(re_form, p, q, a.re);
        self.add_im(re_form, p, q, -a.im);
        self.add_im(im_form, p, q, a.re);
        self.add_re(im_form, p, q, a.im);
    }

    /// Real and imaginary parts of `<A, H>` as linear forms.
    pub fn inner_forms(&self, a: &ComplexMatrix) -> (LinearForm, LinearForm) {
        let (mut re, mut im) = (FormBuilder::new(), FormBuilder::new());
        for (p, q, v) in a.nonzeros() {
            self.add_product(&mut re, &mut im, p, q, v);
        }
        (re.build(), im.build())
    }
}

/// Rows forcing a symmetric `2n x 2n` variable into the pattern
/// `[H_R, -H_I; H_I, H_R]`: `V[i,j] - V[i+n,j+n] = 0` and
/// `V[i,j+n] + V[j,i+n] = 0` for `i <= j`. Emits `n(n+1)` rows.
pub fn structural_rows(var: SymVar, n: usize) -> Vec<Row> {
    let mut rows = Vec::with_capacity(n * (n + 1));
    for i in 0..n {
        for j in i..n {
            let mut f = FormBuilder::new();
            var.add_entry(&mut f, i, j, 1.0);
            var.add_entry(&mut f, i + n, j + n, -1.0);
            rows.push(Row {
                form: f.build(),
                rhs: 0.0,
            });
        }
    }
    for i in 0..n {
        for j in i..n {
            let mut f = FormBuilder::new();
            var.add_entry(&mut f, i, j + n, 1.0);
            var.add_entry(&mut f, j, i + n, 1.0);
            rows.push(Row {
                form: f.build(),
                rhs: 0.0,
            });
        }
    }
    rows
}

/// Structural rows for a single `2n x 2n` PSD block (block 0).
pub fn structural_constraints(n: usize) -> Vec<Row> {
    structural_rows(SymVar::Psd { block: 0 }, n)
}

fn primal_program(p: &ComplexSDP, h: HermitianVar, structural: bool) -> RealConicProgram {
    let n = p.dim();
    let (mut re_rows, mut im_rows) = (Vec::new(), Vec::new());
    for (i, a) in p.data().iter().enumerate() {
        let (re, im) = h.inner_forms(a);
        re_rows.push(Row {
            form: re,
            rhs: p.rhs().re[i],
        });
        im_rows.push(Row {
            form: im,
            rhs: p.rhs().im[i],
        });
    }
    // Real and imaginary rows interleaved per data matrix: row 2i is the real
    // part of constraint i, row 2i+1 its imaginary part.
    let mut rows: Vec<Row> = re_rows
        .into_iter()
        .zip(im_rows)
        .flat_map(|(r, i)| [r, i])
        .collect();
    if structural {
        rows.extend(structural_constraints(n));
    }
    let (objective, _) = h.inner_forms(&p.objective().to_complex());
    RealConicProgram {
        psd_blocks: vec![2 * n],
        n_free: 0,
        rows,
        objective,
        sense: Sense::Maximize,
    }
}

/// Embedding form: one `2n` block `Y`, `2m` data rows, `n(n+1)` structural rows.
pub fn reformulate_primal_naive(p: &ComplexSDP) -> RealConicProgram {
    let n = p.dim();
    primal_program(
        p,
        HermitianVar::Embedded {
            var: SymVar::Psd { block: 0 },
            n,
        },
        true,
    )
}

/// Dual-view form: one `2n` block `X` and exactly `2m` rows.
pub fn reformulate_primal_dualview(p: &ComplexSDP) -> RealConicProgram {
    primal_program(p, HermitianVar::DualView { block: 0, n: p.dim() }, false)
}

/// Symmetric part of `[A_R, -A_I; A_I, A_R]`, or of `[A_I, A_R; -A_R, A_I]`
/// when `imaginary` is set.
fn realified(a: &ComplexMatrix, imaginary: bool) -> faer::Mat<f64> {
    let n = a.dim();
    let raw = |r: usize, c: usize| -> f64 {
        let (i, j) = (r % n, c % n);
        let (ar, ai) = (a.re()[(i, j)], a.im()[(i, j)]);
        match (imaginary, r < n, c < n) {
            (false, true, true) | (false, false, false) => ar,
            (false, true, false) => -ai,
            (false, false, true) => ai,
            (true, true, true) | (true, false, false) => ai,
            (true, true, false) => ar,
            (true, false, true) => -ar,
        }
    };
    faer::Mat::from_fn(2 * n, 2 * n, |r, c| 0.5 * (raw(r, c) + raw(c, r)))
}

/// The real form of the complex dual
/// `min b_R^T y_R - b_I^T y_I  s.t.  S(y) - C' PSD`.
///
/// Free scalars `0..m` hold `y_R` and `m..2m` hold `y_I`. The LMI matrix is
/// carried by one `2n` PSD slack block `S` with one row per upper-triangle
/// entry, `S[p,q] - M(y)[p,q] = -C'[p,q]`, where `M(y)` is the symmetric part
/// of `sum_i y_R,i [A_R, -A_I; A_I, A_R] - y_I,i [A_I, A_R; -A_R, A_I]` and
/// `C' = [C_R, -C_I; C_I, C_R]`.
pub fn reformulate_dual(p: &ComplexSDP) -> RealConicProgram {
    let n = p.dim();
    let m = p.n_constraints();
    let dim = 2 * n;
    let c_block = {
        let c = p.objective().to_complex();
        realified(&c, false)
    };
    let re_mats: Vec<faer::Mat<f64>> = p
        .data()
        .iter()
        .map(|a| realified(a, false))
        .collect();
    let im_mats: Vec<faer::Mat<f64>> = p
        .data()
        .iter()
        .map(|a| realified(a, true))
        .collect();

    let mut rows = Vec::with_capacity(dim * (dim + 1) / 2);
    for q in 0..dim {
        for r in 0..=q {
            let mut f = FormBuilder::new();
            f.add(Var::psd(0, r, q), if r == q { 1.0 } else { 0.5 });
            for i in 0..m {
                f.add(Var::Free(i), -re_mats[i][(r, q)]);
                f.add(Var::Free(m + i), im_mats[i][(r, q)]);
            }
            rows.push(Row {
                form: f.build(),
                rhs: -c_block[(r, q)],
            });
        }
    }
    let mut obj = FormBuilder::new();
    for i in 0..m {
        obj.add(Var::Free(i), p.rhs().re[i]);
        obj.add(Var::Free(m + i), -p.rhs().im[i]);
    }
    RealConicProgram {
        psd_blocks: vec![dim],
        n_free: 2 * m,
        rows,
        objective: obj.build(),
        sense: Sense::Minimize,
    }
}

/// Objective value `<C_R, H_R> - <C_I, H_I>` of a Hermitian point.
pub fn complex_objective(p: &ComplexSDP, h: &HermitianMatrix) -> f64 {
    crate::complex::inner_product(&p.objective().to_complex(), h)
        .map(|v| v.re)
        .unwrap_or(f64::NAN)
}
