//! Real conic programs: block-diagonal PSD variables, free scalars, and
//! sparse linear equality rows.
//!
//! Every PSD entry is keyed by its upper-triangle position `(i, j)` with
//! `i <= j`. A coefficient `c` stored at `(i, j)` with `i < j` multiplies
//! `X[i,j] + X[j,i]`; on the diagonal it multiplies `X[i,i]`. This is the same
//! convention as the SDPA sparse format, so a row is the matrix inner product
//! `<F, X>` where `F` is the symmetric matrix holding `c` at both positions.

use std::collections::BTreeMap;

use faer::Mat;

use crate::error::{Error, Result};

/// A scalar coordinate of a [`RealConicProgram`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Var {
    /// Upper-triangle entry `(i, j)`, `i <= j`, of PSD block `block`.
    Psd { block: usize, i: usize, j: usize },
    /// Free scalar.
    Free(usize),
}

impl Var {
    /// PSD coordinate with its indices put in canonical order.
    pub fn psd(block: usize, i: usize, j: usize) -> Self {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        Var::Psd { block, i, j }
    }
}

/// Optimization sense of the objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Maximize,
    Minimize,
}

/// A canonical sparse linear functional: sorted, duplicate-free, no zeros.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearForm {
    terms: Vec<(Var, f64)>,
}

impl LinearForm {
    pub fn terms(&self) -> &[(Var, f64)] {
        &self.terms
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, var: Var) -> f64 {
        match self.terms.binary_search_by(|(v, _)| v.cmp(&var)) {
            Ok(k) => self.terms[k].1,
            Err(_) => 0.0,
        }
    }

    /// Evaluates the functional on explicit block matrices and free values.
    pub fn eval(&self, blocks: &[Mat<f64>], free: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|&(var, c)| match var {
                Var::Psd { block, i, j } => {
                    let x = &blocks[block];
                    if i == j {
                        c * x[(i, i)]
                    } else {
                        c * (x[(i, j)] + x[(j, i)])
                    }
                }
                Var::Free(k) => c * free[k],
            })
            .sum()
    }
}

/// Accumulates coefficients and produces a canonical [`LinearForm`].
#[derive(Debug, Clone, Default)]
pub struct FormBuilder {
    acc: BTreeMap<Var, f64>,
}

impl FormBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `coef` to the stored coefficient of `var` (raw storage semantics).
    pub fn add(&mut self, var: Var, coef: f64) -> &mut Self {
        if coef != 0.0 {
            *self.acc.entry(var).or_insert(0.0) += coef;
        }
        self
    }

    /// Adds `coef * X[r, c]` for the symmetric PSD block `block`.
    pub fn add_psd_entry(&mut self, block: usize, r: usize, c: usize, coef: f64) -> &mut Self {
        let coef = if r == c { coef } else { 0.5 * coef };
        self.add(Var::psd(block, r, c), coef)
    }

    pub fn build(self) -> LinearForm {
        LinearForm {
            terms: self.acc.into_iter().filter(|&(_, c)| c != 0.0).collect(),
        }
    }
}

/// One equality row `form = rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub form: LinearForm,
    pub rhs: f64,
}

/// Block-diagonal PSD cones, free scalars, equality rows, and a linear objective.
#[derive(Debug, Clone, PartialEq)]
pub struct RealConicProgram {
    pub psd_blocks: Vec<usize>,
    pub n_free: usize,
    pub rows: Vec<Row>,
    pub objective: LinearForm,
    pub sense: Sense,
}

impl RealConicProgram {
    /// Validates indices, canonical ordering, and finiteness.
    pub fn validate(&self) -> Result<()> {
        if self.psd_blocks.iter().any(|&n| n == 0) {
            return Err(Error::Invalid("PSD block of size 0".into()));
        }
        if self.psd_blocks.is_empty() && self.n_free == 0 {
            return Err(Error::Invalid("program has no variables".into()));
        }
        let check = |form: &LinearForm, what: &str| -> Result<()> {
            let mut prev: Option<Var> = None;
            for &(var, c) in &form.terms {
                if !c.is_finite() {
                    return Err(Error::NonFinite("program coefficient"));
                }
                if let Some(p) = prev {
                    if p >= var {
                        return Err(Error::Invalid(format!("{what}: terms not canonical")));
                    }
                }
                prev = Some(var);
                match var {
                    Var::Psd { block, i, j } => {
                        let n = *self.psd_blocks.get(block).ok_or_else(|| {
                            Error::Invalid(format!("{what}: block {block} out of range"))
                        })?;
                        if i > j || j >= n {
                            return Err(Error::Invalid(format!(
                                "{what}: entry ({i},{j}) invalid for block {block} of size {n}"
                            )));
                        }
                    }
                    Var::Free(k) => {
                        if k >= self.n_free {
                            return Err(Error::Invalid(format!("{what}: free {k} out of range")));
                        }
                    }
                }
            }
            Ok(())
        };
        check(&self.objective, "objective")?;
        for (k, row) in self.rows.iter().enumerate() {
            if !row.rhs.is_finite() {
                return Err(Error::NonFinite("row right-hand side"));
            }
            check(&row.form, &format!("row {k}"))?;
        }
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    /// Largest PSD block dimension.
    pub fn max_block(&self) -> usize {
        self.psd_blocks.iter().copied().max().unwrap_or(0)
    }
}

/// Termination status of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    MaxIter,
    Infeasible,
    Numerical,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::MaxIter => "max_iter",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Numerical => "numerical",
        };
        f.write_str(s)
    }
}

/// Relative residuals of the returned iterate.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Residuals {
    /// `||b - A(X) - Bx||_inf / (1 + ||b||_inf)`.
    pub primal_inf: f64,
    /// `||C - A*(y) - Z||_inf` together with the free-variable dual rows, over `1 + ||C||_inf`.
    pub dual_inf: f64,
    /// `|primal_obj - dual_obj| / (1 + |primal_obj|)`.
    pub gap: f64,
}

/// Result of [`crate::solver::solve`].
///
/// `dual_row_values` are the multipliers `y` of the rows, signed so that the
/// dual objective is `b^T y` in the program's own sense.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub objective: f64,
    pub dual_objective: f64,
    /// One symmetric matrix per PSD block.
    pub primal_blocks: Vec<Mat<f64>>,
    pub free_values: Vec<f64>,
    pub dual_row_values: Vec<f64>,
    pub residuals: Residuals,
    pub iterations: usize,
}

impl SolveResult {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}
