//! Exponent vectors and graded-lexicographic monomial bases.

use std::cmp::Ordering;
use std::collections::HashMap;

use crate::error::{Error, Result};

/// Largest basis this crate will enumerate.
pub const MAX_BASIS_LEN: usize = 1 << 22;

/// Exponent vector `alpha` of the monomial `z^alpha`.
///
/// Ordered graded-lexicographically: total degree first, then the entries
/// lexicographically.
#[derive(Debug, Clone, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct Exponent(Vec<u32>);

impl Exponent {
    pub fn new(entries: Vec<u32>) -> Self {
        Exponent(entries)
    }

    pub fn zero(s: usize) -> Self {
        Exponent(vec![0; s])
    }

    /// `e_i` in `s` variables.
    pub fn unit(s: usize, i: usize) -> Self {
        let mut e = vec![0; s];
        e[i] = 1;
        Exponent(e)
    }

    pub fn entries(&self) -> &[u32] {
        &self.0
    }

    /// Number of variables.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.0.iter().map(|&e| e as usize).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    /// Exponent of the product `z^self * z^other`.
    pub fn add(&self, other: &Exponent) -> Exponent {
        assert_eq!(self.len(), other.len(), "exponents in different variable counts");
        Exponent(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }
}

impl Ord for Exponent {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree().cmp(&other.degree()).then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Exponent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl std::fmt::Display for Exponent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(")?;
        for (k, e) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, ")")
    }
}

/// `binomial(s + d, d)`, or `None` on overflow.
pub fn basis_len(s: usize, d: usize) -> Option<usize> {
    // C(s+k, k) = C(s+k-1, k-1) * (s+k) / k, exact at every step
    let mut c: usize = 1;
    for k in 1..=d {
        c = c.checked_mul(s.checked_add(k)?)? / k;
    }
    Some(c)
}

/// All exponents of total degree at most `d` in `s` variables, in graded-lex order.
#[derive(Debug, Clone, PartialEq)]
pub struct MonomialBasis {
    s: usize,
    d: usize,
    list: Vec<Exponent>,
    index: HashMap<Exponent, usize>,
}

impl MonomialBasis {
    pub fn new(s: usize, d: usize) -> Result<Self> {
        if s == 0 {
            return Err(Error::Invalid("monomial basis needs at least one variable".into()));
        }
        let len = basis_len(s, d)
            .filter(|&n| n <= MAX_BASIS_LEN)
            .ok_or(Error::BasisTooLarge { s, d })?;
        let mut list = Vec::with_capacity(len);
        let mut buf = vec![0u32; s];
        for k in 0..=d {
            push_compositions(&mut buf, 0, k as u32, &mut list);
        }
        debug_assert_eq!(list.len(), len);
        let index = list.iter().cloned().enumerate().map(|(i, e)| (e, i)).collect();
        Ok(Self { s, d, list, index })
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.list.len()
    }

    pub fn is_empty(&self) -> bool {
        self.list.is_empty()
    }

    pub fn list(&self) -> &[Exponent] {
        &self.list
    }

    pub fn get(&self, i: usize) -> &Exponent {
        &self.list[i]
    }

    pub fn position(&self, e: &Exponent) -> Option<usize> {
        self.index.get(e).copied()
    }

    /// Values `z^alpha` for every basis element.
    pub fn evaluate(&self, z: &[num_complex::Complex64]) -> Vec<num_complex::Complex64> {
        self.list.iter().map(|e| monomial_value(e, z)).collect()
    }
}

/// `monomial_basis(s, d)`.
pub fn monomial_basis(s: usize, d: usize) -> Result<MonomialBasis> {
    MonomialBasis::new(s, d)
}

/// `z^alpha`.
pub fn monomial_value(alpha: &Exponent, z: &[num_complex::Complex64]) -> num_complex::Complex64 {
    alpha
        .entries()
        .iter()
        .zip(z)
        .fold(num_complex::Complex64::new(1.0, 0.0), |acc, (&e, zi)| acc * zi.powu(e))
}

/// Appends the compositions of `rest` into `buf[pos..]` in lexicographic order.
fn push_compositions(buf: &mut [u32], pos: usize, rest: u32, out: &mut Vec<Exponent>) {
    if pos + 1 == buf.len() {
        buf[pos] = rest;
        out.push(Exponent(buf.to_vec()));
        return;
    }
    for e in 0..=rest {
        buf[pos] = e;
        push_compositions(buf, pos + 1, rest - e, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex(v: &[u32]) -> Exponent {
        Exponent::new(v.to_vec())
    }

    #[test]
    fn two_variables_degree_one() {
        let b = monomial_basis(2, 1).unwrap();
        assert_eq!(b.list(), &[ex(&[0, 0]), ex(&[0, 1]), ex(&[1, 0])]);
    }

    #[test]
    fn sizes() {
        assert_eq!(monomial_basis(5, 2).unwrap().len(), 21);
        assert_eq!(monomial_basis(7, 3).unwrap().len(), 120);
        assert_eq!(monomial_basis(3, 0).unwrap().list(), &[Exponent::zero(3)]);
        assert_eq!(basis_len(15, 2), Some(136));
    }

    #[test]
    fn absurd_sizes_are_rejected() {
        assert!(basis_len(usize::MAX, 2).is_none());
        assert!(matches!(monomial_basis(1000, 10), Err(Error::BasisTooLarge { .. })));
        assert!(monomial_basis(0, 2).is_err());
    }

    #[test]
    fn order_is_graded() {
        assert!(ex(&[2, 0]) > ex(&[0, 1]));
        assert!(ex(&[1, 1]) < ex(&[2, 0]));
        assert_eq!(ex(&[1, 0]).add(&ex(&[0, 2])), ex(&[1, 2]));
    }
}
