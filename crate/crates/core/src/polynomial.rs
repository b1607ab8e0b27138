//! Polynomials in `z` and `conj(z)` with complex coefficients.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::monomial::{monomial_value, Exponent};

/// Imaginary part of an evaluation tolerated before [`CPolynomial::eval`] fails.
pub const EVAL_IMAG_TOL: f64 = 1e-12;

/// `f(z, conj z) = sum b[beta, gamma] z^beta conj(z)^gamma`.
///
/// Zero coefficients are never stored. Hermitian symmetry,
/// `b[beta, gamma] = conj(b[gamma, beta])`, is checked by
/// [`CPolynomial::is_hermitian`]; models built on top require it.
#[derive(Debug, Clone, PartialEq)]
pub struct CPolynomial {
    s: usize,
    terms: BTreeMap<(Exponent, Exponent), Complex64>,
}

impl CPolynomial {
    pub fn zero(s: usize) -> Self {
        Self { s, terms: BTreeMap::new() }
    }

    /// The constant polynomial `c`.
    pub fn constant(s: usize, c: f64) -> Self {
        let mut p = Self::zero(s);
        p.add_term(Exponent::zero(s), Exponent::zero(s), Complex64::new(c, 0.0));
        p
    }

    /// Builds a polynomial from terms; repeated keys are summed.
    pub fn from_terms(
        s: usize,
        terms: impl IntoIterator<Item = (Exponent, Exponent, Complex64)>,
    ) -> Result<Self> {
        let mut p = Self::zero(s);
        for (b, g, c) in terms {
            if b.len() != s || g.len() != s {
                return Err(Error::Dimension(format!(
                    "term ({b}, {g}) does not have {s} variables"
                )));
            }
            if !(c.re.is_finite() && c.im.is_finite()) {
                return Err(Error::NonFinite("polynomial coefficient"));
            }
            p.add_term(b, g, c);
        }
        Ok(p)
    }

    pub fn s(&self) -> usize {
        self.s
    }

    /// Adds `c z^beta conj(z)^gamma`.
    pub fn add_term(&mut self, beta: Exponent, gamma: Exponent, c: Complex64) {
        debug_assert!(beta.len() == self.s && gamma.len() == self.s);
        let key = (beta, gamma);
        let v = self.terms.get(&key).copied().unwrap_or_default() + c;
        if v == Complex64::new(0.0, 0.0) {
            self.terms.remove(&key);
        } else {
            self.terms.insert(key, v);
        }
    }

    pub fn coefficient(&self, beta: &Exponent, gamma: &Exponent) -> Complex64 {
        // BTreeMap lookups need an owned tuple key
        self.terms.get(&(beta.clone(), gamma.clone())).copied().unwrap_or_default()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exponent, &Exponent, Complex64)> {
        self.terms.iter().map(|((b, g), &c)| (b, g, c))
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Total degree `max |beta| + |gamma|` (0 for the zero polynomial).
    pub fn degree(&self) -> usize {
        self.terms.keys().map(|(b, g)| b.degree() + g.degree()).max().unwrap_or(0)
    }

    /// `max(|beta|, |gamma|)` over the support.
    pub fn side_degree(&self) -> usize {
        self.terms.keys().map(|(b, g)| b.degree().max(g.degree())).max().unwrap_or(0)
    }

    /// Largest `|b[beta, gamma] - conj(b[gamma, beta])|` over the support.
    pub fn hermitian_defect(&self) -> f64 {
        self.terms
            .iter()
            .map(|((b, g), &c)| (c - self.coefficient(g, b).conj()).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian_defect() == 0.0
    }

    /// Checks Hermitian symmetry exactly.
    pub fn check_hermitian(&self) -> Result<()> {
        for ((b, g), &c) in &self.terms {
            let mirror = self.coefficient(g, b).conj();
            if c != mirror {
                return Err(Error::NotHermitianSymmetric(format!(
                    "coefficient of ({b}, {g}) is {c} but the mirrored term gives {mirror}"
                )));
            }
        }
        Ok(())
    }

    /// Completes Hermitian symmetry where only one of a mirrored pair is stored.
    /// Returns the number of completed terms; conflicting pairs are an error.
    pub fn complete_hermitian(&mut self) -> Result<usize> {
        let missing: Vec<(Exponent, Exponent, Complex64)> = self
            .terms
            .iter()
            .filter(|((b, g), _)| !self.terms.contains_key(&(g.clone(), b.clone())))
            .map(|((b, g), c)| (g.clone(), b.clone(), c.conj()))
            .collect();
        let n = missing.len();
        for (b, g, c) in missing {
            self.terms.insert((b, g), c);
        }
        self.check_hermitian()?;
        Ok(n)
    }

    /// `self + other`.
    pub fn plus(&self, other: &CPolynomial) -> CPolynomial {
        assert_eq!(self.s, other.s, "polynomials in different variable counts");
        let mut out = self.clone();
        for (b, g, c) in other.terms() {
            out.add_term(b.clone(), g.clone(), c);
        }
        out
    }

    /// `a * self` for real `a`.
    pub fn scale(&self, a: f64) -> CPolynomial {
        let mut out = CPolynomial::zero(self.s);
        for (b, g, c) in self.terms() {
            out.add_term(b.clone(), g.clone(), c * a);
        }
        out
    }

    /// Full complex value of the sum at `z`.
    pub fn eval_complex(&self, z: &[Complex64]) -> Result<Complex64> {
        if z.len() != self.s {
            return Err(Error::Dimension(format!("point has {} entries, expected {}", z.len(), self.s)));
        }
        if z.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::NonFinite("evaluation point"));
        }
        let zc: Vec<Complex64> = z.iter().map(|v| v.conj()).collect();
        Ok(self
            .terms
            .iter()
            .map(|((b, g), &c)| c * monomial_value(b, z) * monomial_value(g, &zc))
            .sum())
    }

    /// Real value at `z`; the imaginary residue must be within [`EVAL_IMAG_TOL`]
    /// relative to the magnitude of the summed terms.
    pub fn eval(&self, z: &[Complex64]) -> Result<f64> {
        let v = self.eval_complex(z)?;
        let zc: Vec<Complex64> = z.iter().map(|v| v.conj()).collect();
        let mag: f64 = self
            .terms
            .iter()
            .map(|((b, g), &c)| (c * monomial_value(b, z) * monomial_value(g, &zc)).norm())
            .sum();
        if v.im.abs() > EVAL_IMAG_TOL * (1.0 + mag) {
            return Err(Error::NotHermitianSymmetric(format!(
                "evaluation has imaginary part {}",
                v.im
            )));
        }
        Ok(v.re)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex(v: &[u32]) -> Exponent {
        Exponent::new(v.to_vec())
    }

    #[test]
    fn modulus_squared() {
        let p = CPolynomial::from_terms(1, [(ex(&[1]), ex(&[1]), Complex64::new(1.0, 0.0))]).unwrap();
        assert_eq!(p.eval(&[Complex64::new(2.0, 0.0)]).unwrap(), 4.0);
        assert_eq!(p.degree(), 2);
        assert!(p.is_hermitian());
    }

    #[test]
    fn cross_terms_cancel() {
        let one = Complex64::new(1.0, 0.0);
        let p = CPolynomial::from_terms(
            2,
            [(ex(&[1, 0]), ex(&[0, 1]), one), (ex(&[0, 1]), ex(&[1, 0]), one)],
        )
        .unwrap();
        let v = p.eval(&[one, Complex64::new(0.0, 1.0)]).unwrap();
        assert!(v.abs() < 1e-15);
    }

    #[test]
    fn completion_and_rejection() {
        let mut p = CPolynomial::from_terms(1, [(ex(&[2]), ex(&[0]), Complex64::new(1.0, 2.0))]).unwrap();
        assert!(p.check_hermitian().is_err());
        assert!(p.eval(&[Complex64::new(0.3, 0.4)]).is_err());
        assert_eq!(p.complete_hermitian().unwrap(), 1);
        assert_eq!(p.coefficient(&ex(&[0]), &ex(&[2])), Complex64::new(1.0, -2.0));
        assert!(p.is_hermitian());
    }

    #[test]
    fn cancellation_removes_terms() {
        let mut p = CPolynomial::constant(1, 1.0);
        p.add_term(ex(&[0]), ex(&[0]), Complex64::new(-1.0, 0.0));
        assert!(p.is_zero());
    }
}
