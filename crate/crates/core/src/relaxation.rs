//! Complex moment-HSOS relaxations and their two real forms.
//!
//! At order `d` the relaxation is
//!
//! ```text
//! max lambda  s.t.  sum_i <A^i[beta,gamma], H_i> + lambda [beta = gamma = 0] = b[beta,gamma]
//! ```
//!
//! for every key `(beta, gamma)` of the degree-`d` basis, where `H_0` and the
//! `H_i` of inequality constraints are Hermitian PSD and the `H_i` of equality
//! constraints are free Hermitian multipliers. Because the equations for
//! `(beta, gamma)` and `(gamma, beta)` are conjugate, only keys with
//! `beta <= gamma` are emitted.
//!
//! Row layout: real rows for every canonical key in key order, then the
//! imaginary rows, then (naive form only) the structural rows of each block
//! in block order. The naive form keeps the imaginary rows of diagonal keys,
//! the dual-view form drops them since they vanish identically.

use std::collections::{BTreeMap, HashMap};

use num_complex::Complex64;

use crate::complex::HermitianMatrix;
use crate::cpop::{ConstraintKind, Cpop};
use crate::error::{Error, Result};
use crate::monomial::{basis_len, monomial_basis, Exponent, MonomialBasis};
use crate::program::{FormBuilder, LinearForm, RealConicProgram, Row, Sense, SolveResult, Var};
use crate::reformulate::{structural_rows, Form, HermitianVar, SymVar};

/// Pseudo-moment index `y[beta, gamma]`, the value of `z^beta conj(z)^gamma`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub struct MomentKey {
    pub beta: Exponent,
    pub gamma: Exponent,
}

impl MomentKey {
    pub fn new(beta: Exponent, gamma: Exponent) -> Self {
        Self { beta, gamma }
    }

    /// Key with `beta <= gamma`, and whether the pair was swapped (which
    /// conjugates the moment).
    pub fn canonical(beta: Exponent, gamma: Exponent) -> (Self, bool) {
        if beta <= gamma {
            (Self { beta, gamma }, false)
        } else {
            (Self { beta: gamma, gamma: beta }, true)
        }
    }

    pub fn is_diagonal(&self) -> bool {
        self.beta == self.gamma
    }
}

impl std::fmt::Display for MomentKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{};{}", self.beta, self.gamma)
    }
}

/// Real or imaginary part of a moment equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Part {
    Real,
    Imaginary,
}

/// What a relaxation block comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase", tag = "source", content = "constraint")]
pub enum BlockSource {
    Objective,
    Inequality(usize),
    Equality(usize),
}

/// Complex data matrices `A^i[beta, gamma]` of one block.
#[derive(Debug, Clone)]
pub struct BlockData {
    pub source: BlockSource,
    /// Degree `d - d_i` basis indexing the block.
    pub basis: MonomialBasis,
    /// Key (positions in the order-`d` basis) to entries `(row, col, value)`.
    pub entries: BTreeMap<(usize, usize), Vec<(usize, usize, Complex64)>>,
}

/// The data matrices of every block at one order.
#[derive(Debug, Clone)]
pub struct DataMatrixSet {
    pub order: usize,
    pub basis: MonomialBasis,
    pub blocks: Vec<BlockData>,
}

impl DataMatrixSet {
    /// `A^i[beta, gamma]` as a dense complex matrix (zero when the key is absent).
    pub fn dense(&self, block: usize, key: &MomentKey) -> Result<Vec<Vec<Complex64>>> {
        let b = &self.blocks[block];
        let n = b.basis.len();
        let mut out = vec![vec![Complex64::new(0.0, 0.0); n]; n];
        let pos = |e: &Exponent| {
            self.basis
                .position(e)
                .ok_or_else(|| Error::MissingMoment(key.to_string()))
        };
        let k = (pos(&key.beta)?, pos(&key.gamma)?);
        if let Some(ents) = b.entries.get(&k) {
            for &(r, c, v) in ents {
                out[r][c] += v;
            }
        }
        Ok(out)
    }
}

fn check_order(p: &Cpop, d: usize) -> Result<()> {
    let d_min = p.d_min();
    if d < d_min {
        return Err(Error::OrderTooLow { order: d, d_min });
    }
    Ok(())
}

/// Builds `A^0` (elementary) and the localizing data `A^i` of every constraint.
pub fn build_data_matrices(p: &Cpop, d: usize) -> Result<DataMatrixSet> {
    check_order(p, d)?;
    let s = p.s();
    let basis = monomial_basis(s, d)?;
    let w = basis.len();
    let mut blocks = Vec::with_capacity(1 + p.constraints().len());

    let mut entries = BTreeMap::new();
    for j in 0..w {
        for k in 0..w {
            entries.insert((j, k), vec![(j, k, Complex64::new(1.0, 0.0))]);
        }
    }
    blocks.push(BlockData { source: BlockSource::Objective, basis: basis.clone(), entries });

    for (i, c) in p.constraints().iter().enumerate() {
        let di = p.constraint_order(i);
        let sub = monomial_basis(s, d - di)?;
        let mut entries: BTreeMap<(usize, usize), Vec<(usize, usize, Complex64)>> = BTreeMap::new();
        for (bj, bpj) in sub.list().iter().enumerate() {
            for (gk, gpk) in sub.list().iter().enumerate() {
                for (b2, g2, coef) in c.g.terms() {
                    let beta = bpj.add(b2);
                    let gamma = gpk.add(g2);
                    let key = match (basis.position(&beta), basis.position(&gamma)) {
                        (Some(a), Some(b)) => (a, b),
                        _ => {
                            return Err(Error::Invalid(format!(
                                "constraint {i} reaches ({beta}, {gamma}) outside order {d}"
                            )))
                        }
                    };
                    let list = entries.entry(key).or_default();
                    match list.iter_mut().find(|(r, cc, _)| *r == bj && *cc == gk) {
                        Some(e) => e.2 += coef,
                        None => list.push((bj, gk, coef)),
                    }
                }
            }
        }
        let source = match c.kind {
            ConstraintKind::Inequality => BlockSource::Inequality(i),
            ConstraintKind::Equality => BlockSource::Equality(i),
        };
        blocks.push(BlockData { source, basis: sub, entries });
    }
    Ok(DataMatrixSet { order: d, basis, blocks })
}

/// `M(y)` with `[M]_{beta,gamma} = y[beta, gamma]` over `basis`.
pub fn moment_matrix(y: &BTreeMap<MomentKey, Complex64>, basis: &MonomialBasis) -> Result<HermitianMatrix> {
    let n = basis.len();
    let mut re = faer::Mat::<f64>::zeros(n, n);
    let mut im = faer::Mat::<f64>::zeros(n, n);
    for j in 0..n {
        for k in j..n {
            let v = lookup(y, basis.get(j), basis.get(k))?;
            re[(j, k)] = v.re;
            re[(k, j)] = v.re;
            if j != k {
                im[(j, k)] = v.im;
                im[(k, j)] = -v.im;
            }
        }
    }
    HermitianMatrix::new(re, im)
}

/// `y[beta, gamma]`, using `conj(y[gamma, beta])` when only the mirror is stored.
pub fn lookup(y: &BTreeMap<MomentKey, Complex64>, beta: &Exponent, gamma: &Exponent) -> Result<Complex64> {
    if let Some(v) = y.get(&MomentKey::new(beta.clone(), gamma.clone())) {
        return Ok(*v);
    }
    y.get(&MomentKey::new(gamma.clone(), beta.clone()))
        .map(|v| v.conj())
        .ok_or_else(|| Error::MissingMoment(format!("{beta};{gamma}")))
}

/// One relaxation block and the real variables carrying it.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct BlockInfo {
    #[serde(flatten)]
    pub source: BlockSource,
    /// `omega_i`, the size of the complex block.
    pub omega: usize,
    /// `2 omega_i`, the size of its real matrix.
    pub size: usize,
    /// PSD block id, or `None` for a free multiplier.
    pub psd_block: Option<usize>,
    /// First free scalar of a free multiplier.
    pub free_offset: Option<usize>,
}

/// What a row of the assembled program encodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RowLabel {
    Moment { key: MomentKey, part: Part },
    /// Structural row of relaxation block `block`.
    Structural { block: usize },
}

/// An assembled relaxation in one real form.
#[derive(Debug, Clone)]
pub struct RelaxationArtifact {
    s: usize,
    order: usize,
    form: Form,
    blocks: Vec<BlockInfo>,
    program: RealConicProgram,
    labels: Vec<RowLabel>,
    row_index: HashMap<(MomentKey, Part), usize>,
    lambda_id: usize,
}

impl RelaxationArtifact {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn form(&self) -> Form {
        self.form
    }

    pub fn blocks(&self) -> &[BlockInfo] {
        &self.blocks
    }

    pub fn program(&self) -> &RealConicProgram {
        &self.program
    }

    pub fn into_program(self) -> RealConicProgram {
        self.program
    }

    /// One label per program row.
    pub fn row_labels(&self) -> &[RowLabel] {
        &self.labels
    }

    pub fn row_of(&self, key: &MomentKey, part: Part) -> Option<usize> {
        self.row_index.get(&(key.clone(), part)).copied()
    }

    pub fn lambda_id(&self) -> usize {
        self.lambda_id
    }
}

/// Assembly switches beyond the form.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AssemblyOptions {
    /// Emit equations for every ordered key, not only `beta <= gamma`.
    pub all_pairs: bool,
}

/// Assembles the order-`d` relaxation of `p` in the given real form.
pub fn assemble_hsos(p: &Cpop, d: usize, form: Form) -> Result<RelaxationArtifact> {
    assemble_hsos_with(p, d, form, AssemblyOptions::default())
}

pub fn assemble_hsos_with(p: &Cpop, d: usize, form: Form, opts: AssemblyOptions) -> Result<RelaxationArtifact> {
    if p.objective().is_zero() {
        return Err(Error::Invalid("objective polynomial is empty".into()));
    }
    let data = build_data_matrices(p, d)?;
    let w = data.basis.len();

    // variables: lambda first, then multiplier blocks in block order
    let lambda_id = 0;
    let mut n_free = 1;
    let mut psd_blocks = Vec::new();
    let mut infos = Vec::with_capacity(data.blocks.len());
    let mut hvars = Vec::with_capacity(data.blocks.len());
    for b in &data.blocks {
        let n = b.basis.len();
        let free = matches!(b.source, BlockSource::Equality(_));
        let (info, hv) = if free {
            let offset = n_free;
            let hv = match form {
                Form::Naive => {
                    n_free += SymVar::packed_len(2 * n);
                    HermitianVar::Embedded { var: SymVar::Free { offset, dim: 2 * n }, n }
                }
                Form::Dualview => {
                    n_free += HermitianVar::free_len(n);
                    HermitianVar::Free { re_offset: offset, im_offset: offset + n * (n + 1) / 2, n }
                }
            };
            let info = BlockInfo { source: b.source, omega: n, size: 2 * n, psd_block: None, free_offset: Some(offset) };
            (info, hv)
        } else {
            let block = psd_blocks.len();
            psd_blocks.push(2 * n);
            let hv = match form {
                Form::Naive => HermitianVar::Embedded { var: SymVar::Psd { block }, n },
                Form::Dualview => HermitianVar::DualView { block, n },
            };
            let info = BlockInfo { source: b.source, omega: n, size: 2 * n, psd_block: Some(block), free_offset: None };
            (info, hv)
        };
        infos.push(info);
        hvars.push(hv);
    }

    let keys: Vec<(usize, usize)> = (0..w)
        .flat_map(|j| (0..w).map(move |k| (j, k)))
        .filter(|&(j, k)| opts.all_pairs || j <= k)
        .collect();
    let f = p.objective();
    let mut real_rows = Vec::with_capacity(keys.len());
    let mut imag_rows = Vec::with_capacity(keys.len());
    for &(j, k) in &keys {
        let (beta, gamma) = (data.basis.get(j), data.basis.get(k));
        let (mut re, mut im) = (FormBuilder::new(), FormBuilder::new());
        for (bd, hv) in data.blocks.iter().zip(&hvars) {
            if let Some(ents) = bd.entries.get(&(j, k)) {
                for &(r, c, a) in ents {
                    hv.add_product(&mut re, &mut im, r, c, a);
                }
            }
        }
        if j == 0 && k == 0 {
            re.add(Var::Free(lambda_id), 1.0);
        }
        let b = f.coefficient(beta, gamma);
        if j == k && b.im != 0.0 {
            return Err(Error::NotHermitianSymmetric(format!(
                "diagonal coefficient of ({beta}, {gamma}) has imaginary part {}",
                b.im
            )));
        }
        let key = MomentKey::new(beta.clone(), gamma.clone());
        real_rows.push((key.clone(), Row { form: re.build(), rhs: b.re }));
        let keep_imag = match form {
            Form::Naive => true,
            Form::Dualview => j != k,
        };
        if keep_imag {
            imag_rows.push((key, Row { form: im.build(), rhs: b.im }));
        }
    }
    for (j, k) in f.terms().map(|(b, g, _)| (data.basis.position(b), data.basis.position(g))) {
        if j.is_none() || k.is_none() {
            return Err(Error::Invalid(format!("objective degree exceeds order {d}")));
        }
    }

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut row_index = HashMap::new();
    for (part, list) in [(Part::Real, real_rows), (Part::Imaginary, imag_rows)] {
        for (key, row) in list {
            row_index.insert((key.clone(), part), rows.len());
            labels.push(RowLabel::Moment { key, part });
            rows.push(row);
        }
    }
    if form == Form::Naive {
        for (bi, hv) in hvars.iter().enumerate() {
            if let HermitianVar::Embedded { var, n } = *hv {
                for r in structural_rows(var, n) {
                    labels.push(RowLabel::Structural { block: bi });
                    rows.push(r);
                }
            }
        }
    }

    let mut obj = FormBuilder::new();
    obj.add(Var::Free(lambda_id), 1.0);
    let program = RealConicProgram { psd_blocks, n_free, rows, objective: obj.build(), sense: Sense::Maximize };
    debug_assert!(program.validate().is_ok());
    Ok(RelaxationArtifact { s: p.s(), order: d, form, blocks: infos, program, labels, row_index, lambda_id })
}

/// Sizes of both real forms, computed from basis sizes alone.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct SizeReport {
    pub s: usize,
    pub d: usize,
    /// `omega = binomial(s + d, d)`.
    pub omega: usize,
    /// `omega_i` of every constraint block.
    pub block_omegas: Vec<usize>,
    /// Size of the largest real PSD matrix, `2 omega`.
    pub n_sdp: usize,
    /// `2 omega^2 + 2 omega + sum omega_i (omega_i + 1)`.
    pub m_naive: usize,
    /// `omega^2`.
    pub m_dualview: usize,
    /// `2 omega^2 + 2 omega + sum omega_i`, a closed form that is sometimes
    /// quoted for the naive count; reported for comparison only.
    pub m_naive_short_formula: usize,
}

pub fn size_report(p: &Cpop, d: usize) -> Result<SizeReport> {
    check_order(p, d)?;
    let s = p.s();
    let len = |k: usize| basis_len(s, k).ok_or(Error::BasisTooLarge { s, d: k });
    let omega = len(d)?;
    let block_omegas = (0..p.constraints().len())
        .map(|i| len(d - p.constraint_order(i)))
        .collect::<Result<Vec<_>>>()?;
    let base = 2 * omega * omega + 2 * omega;
    Ok(SizeReport {
        s,
        d,
        omega,
        n_sdp: 2 * omega,
        m_naive: base + block_omegas.iter().map(|w| w * (w + 1)).sum::<usize>(),
        m_dualview: omega * omega,
        m_naive_short_formula: base + block_omegas.iter().sum::<usize>(),
        block_omegas,
    })
}

/// Pseudo-moments from the row multipliers of an optimal solve, normalized
/// so that `y[0, 0] = 1`. Both orientations of every key are returned.
pub fn extract_moments(art: &RelaxationArtifact, res: &SolveResult) -> Result<BTreeMap<MomentKey, Complex64>> {
    if !res.is_optimal() {
        return Err(Error::NotOptimal(res.status.to_string()));
    }
    let y = &res.dual_row_values;
    let mut raw: BTreeMap<MomentKey, Complex64> = BTreeMap::new();
    for (label, &u) in art.labels.iter().zip(y) {
        let RowLabel::Moment { key, part: Part::Real } = label else { continue };
        if key.beta > key.gamma {
            continue;
        }
        let v = if key.is_diagonal() {
            Complex64::new(u, 0.0)
        } else {
            let vi = art.row_of(key, Part::Imaginary).map(|r| y[r]).unwrap_or(0.0);
            Complex64::new(u, -vi) * 0.5
        };
        raw.insert(key.clone(), v);
    }
    let zero = Exponent::zero(art.s);
    let y00 = raw
        .get(&MomentKey::new(zero.clone(), zero))
        .copied()
        .ok_or_else(|| Error::MissingMoment("(0);(0)".into()))?;
    if y00.re.abs() < f64::MIN_POSITIVE {
        return Err(Error::Invalid("zero normalizing moment".into()));
    }
    let mut out = BTreeMap::new();
    for (key, v) in raw {
        let v = v / y00.re;
        if !key.is_diagonal() {
            out.insert(MomentKey::new(key.gamma.clone(), key.beta.clone()), v.conj());
        }
        out.insert(key, v);
    }
    Ok(out)
}

/// Imaginary parts of the diagonal-key equations in the dual-view variables.
/// These are the functionals the dual-view form leaves out; each vanishes on
/// every assignment of its variables.
pub fn omitted_diagonal_functionals(p: &Cpop, d: usize) -> Result<Vec<(MomentKey, LinearForm)>> {
    let art = assemble_hsos(p, d, Form::Dualview)?;
    let data = build_data_matrices(p, d)?;
    let hvars: Vec<HermitianVar> = art
        .blocks
        .iter()
        .map(|b| match (b.psd_block, b.free_offset) {
            (Some(block), _) => HermitianVar::DualView { block, n: b.omega },
            (None, Some(offset)) => HermitianVar::Free {
                re_offset: offset,
                im_offset: offset + b.omega * (b.omega + 1) / 2,
                n: b.omega,
            },
            (None, None) => unreachable!("block without variables"),
        })
        .collect();
    let mut out = Vec::new();
    for j in 0..data.basis.len() {
        let (mut re, mut im) = (FormBuilder::new(), FormBuilder::new());
        for (bd, hv) in data.blocks.iter().zip(&hvars) {
            if let Some(ents) = bd.entries.get(&(j, j)) {
                for &(r, c, a) in ents {
                    hv.add_product(&mut re, &mut im, r, c, a);
                }
            }
        }
        let e = data.basis.get(j).clone();
        out.push((MomentKey::new(e.clone(), e), im.build()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cpop::{gen_sphere_instance, gen_unitnorm_instance, Constraint};
    use crate::polynomial::CPolynomial;

    fn ex(v: &[u32]) -> Exponent {
        Exponent::new(v.to_vec())
    }

    fn disk_problem() -> Cpop {
        // min |z|^2 s.t. 1 - |z|^2 >= 0
        let one = Complex64::new(1.0, 0.0);
        let f = CPolynomial::from_terms(1, [(ex(&[1]), ex(&[1]), one)]).unwrap();
        let g = CPolynomial::from_terms(1, [(ex(&[0]), ex(&[0]), one), (ex(&[1]), ex(&[1]), -one)]).unwrap();
        Cpop::new(f, vec![Constraint { g, kind: ConstraintKind::Inequality }]).unwrap()
    }

    #[test]
    fn localizing_data_for_disk() {
        let data = build_data_matrices(&disk_problem(), 1).unwrap();
        let loc = &data.blocks[1];
        assert_eq!(loc.basis.len(), 1);
        let get = |j, k| loc.entries.get(&(j, k)).cloned().unwrap_or_default();
        assert_eq!(get(0, 0), vec![(0, 0, Complex64::new(1.0, 0.0))]);
        assert_eq!(get(1, 1), vec![(0, 0, Complex64::new(-1.0, 0.0))]);
        assert!(get(0, 1).is_empty() && get(1, 0).is_empty());
        for ents in data.blocks[0].entries.values() {
            assert_eq!(ents.len(), 1);
            assert_eq!(ents[0].2, Complex64::new(1.0, 0.0));
        }
    }

    #[test]
    fn order_below_minimum_is_rejected() {
        let p = gen_sphere_instance(2, 0).unwrap();
        assert!(matches!(assemble_hsos(&p, 1, Form::Naive), Err(Error::OrderTooLow { order: 1, d_min: 2 })));
        assert!(size_report(&p, 1).is_err());
    }

    #[test]
    fn row_counts_match_size_report() {
        for p in [gen_sphere_instance(2, 1).unwrap(), gen_unitnorm_instance(2, 1).unwrap()] {
            let rep = size_report(&p, 2).unwrap();
            let dv = assemble_hsos(&p, 2, Form::Dualview).unwrap();
            let nv = assemble_hsos(&p, 2, Form::Naive).unwrap();
            assert_eq!(dv.program().n_rows(), rep.m_dualview);
            assert_eq!(nv.program().n_rows(), rep.m_naive);
            assert_eq!(dv.program().max_block(), rep.n_sdp);
            assert_eq!(nv.row_labels().len(), nv.program().n_rows());
        }
    }

    #[test]
    fn lambda_only_in_constant_real_row() {
        let p = gen_sphere_instance(2, 3).unwrap();
        let art = assemble_hsos(&p, 2, Form::Dualview).unwrap();
        let lam = Var::Free(art.lambda_id());
        let hits: Vec<usize> = art
            .program()
            .rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r.form.coefficient(lam) != 0.0)
            .map(|(i, _)| i)
            .collect();
        let zero = MomentKey::new(Exponent::zero(2), Exponent::zero(2));
        assert_eq!(hits, vec![art.row_of(&zero, Part::Real).unwrap()]);
        assert_eq!(art.program().rows[hits[0]].form.coefficient(lam), 1.0);
    }

    #[test]
    fn moment_matrix_small() {
        let mut y = BTreeMap::new();
        let a = Complex64::new(0.3, -0.2);
        y.insert(MomentKey::new(ex(&[0]), ex(&[0])), Complex64::new(1.0, 0.0));
        y.insert(MomentKey::new(ex(&[0]), ex(&[1])), a);
        y.insert(MomentKey::new(ex(&[1]), ex(&[1])), Complex64::new(2.0, 0.0));
        let m = moment_matrix(&y, &monomial_basis(1, 1).unwrap()).unwrap();
        assert_eq!(m.get(0, 1), a);
        assert_eq!(m.get(1, 0), a.conj());
        assert_eq!(m.get(1, 1), Complex64::new(2.0, 0.0));
        y.clear();
        assert!(matches!(moment_matrix(&y, &monomial_basis(1, 1).unwrap()), Err(Error::MissingMoment(_))));
    }

    #[test]
    fn canonical_keys() {
        let (k, swapped) = MomentKey::canonical(ex(&[1, 0]), ex(&[0, 1]));
        assert!(swapped);
        assert_eq!(k, MomentKey::new(ex(&[0, 1]), ex(&[1, 0])));
    }
}
