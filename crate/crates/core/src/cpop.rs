//! Complex polynomial optimization problems and the random benchmark families.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::monomial::{monomial_basis, Exponent};
use crate::polynomial::CPolynomial;

/// `g >= 0` or `g = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintKind {
    Inequality,
    Equality,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub g: CPolynomial,
    pub kind: ConstraintKind,
}

/// `inf f(z, conj z)` subject to the constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct Cpop {
    s: usize,
    f: CPolynomial,
    constraints: Vec<Constraint>,
}

impl Cpop {
    /// Validates variable counts and Hermitian symmetry of every polynomial.
    pub fn new(f: CPolynomial, constraints: Vec<Constraint>) -> Result<Self> {
        let s = f.s();
        if s == 0 {
            return Err(Error::Invalid("problem needs at least one variable".into()));
        }
        f.check_hermitian()?;
        for (i, c) in constraints.iter().enumerate() {
            if c.g.s() != s {
                return Err(Error::Dimension(format!(
                    "constraint {i} has {} variables, objective has {s}",
                    c.g.s()
                )));
            }
            if c.g.is_zero() {
                return Err(Error::Invalid(format!("constraint {i} is the zero polynomial")));
            }
            c.g.check_hermitian()?;
        }
        Ok(Self { s, f, constraints })
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn objective(&self) -> &CPolynomial {
        &self.f
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    /// `d_i`: half the degree of `g_i`, rounded up, and at least the largest
    /// one-sided degree so every localizing entry stays inside the order.
    pub fn constraint_order(&self, i: usize) -> usize {
        let g = &self.constraints[i].g;
        g.degree().div_ceil(2).max(g.side_degree())
    }

    /// Smallest admissible relaxation order.
    pub fn d_min(&self) -> usize {
        let f_order = self.f.degree().div_ceil(2).max(self.f.side_degree());
        (0..self.constraints.len())
            .map(|i| self.constraint_order(i))
            .fold(f_order, usize::max)
    }
}

/// RNG stream used for the objective matrix of the generators.
const STREAM_OBJECTIVE: u64 = 1;

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// `[z]_2^* Q [z]_2` for a Hermitian `Q` given row by row.
pub fn quadratic_form_objective(s: usize, q: &[Vec<Complex64>]) -> Result<CPolynomial> {
    let basis = monomial_basis(s, 2)?;
    let n = basis.len();
    if q.len() != n || q.iter().any(|r| r.len() != n) {
        return Err(Error::Dimension(format!("Q must be {n}x{n}")));
    }
    let mut f = CPolynomial::zero(s);
    for j in 0..n {
        for k in 0..n {
            // conj(z^a_j) z^a_k = z^a_k conj(z)^a_j
            f.add_term(basis.get(k).clone(), basis.get(j).clone(), q[j][k]);
        }
    }
    f.check_hermitian()?;
    Ok(f)
}

/// Hermitian `Q` with standard-normal diagonal and off-diagonal real and
/// imaginary parts normal with variance 1/2.
fn normal_hermitian(n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<Complex64>> {
    let mut q = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    let h = std::f64::consts::FRAC_1_SQRT_2;
    for j in 0..n {
        q[j][j] = Complex64::new(rng.sample(StandardNormal), 0.0);
        for k in j + 1..n {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            q[j][k] = Complex64::new(h * re, h * im);
            q[k][j] = q[j][k].conj();
        }
    }
    q
}

/// `(M + M^*) / 2` for `M` with real and imaginary parts uniform on `[0, 1]`.
fn uniform_hermitian(n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<Complex64>> {
    let m: Vec<Vec<Complex64>> = (0..n)
        .map(|_| (0..n).map(|_| Complex64::new(rng.random::<f64>(), rng.random::<f64>())).collect())
        .collect();
    (0..n)
        .map(|j| (0..n).map(|k| (m[j][k] + m[k][j].conj()) * 0.5).collect())
        .collect()
}

/// `|z_i|^2` summed over `vars`.
fn modulus_sum(s: usize, vars: impl IntoIterator<Item = usize>) -> CPolynomial {
    let mut p = CPolynomial::zero(s);
    for i in vars {
        p.add_term(Exponent::unit(s, i), Exponent::unit(s, i), Complex64::new(1.0, 0.0));
    }
    p
}

/// Quartic over the unit sphere: `min [z]_2^* Q [z]_2` s.t. `1 - sum |z_i|^2 = 0`.
pub fn gen_sphere_instance(s: usize, seed: u64) -> Result<Cpop> {
    let n = crate::monomial::basis_len(s, 2).ok_or(Error::BasisTooLarge { s, d: 2 })?;
    let q = normal_hermitian(n, &mut rng(seed, STREAM_OBJECTIVE));
    let f = quadratic_form_objective(s, &q)?;
    let g = CPolynomial::constant(s, 1.0).plus(&modulus_sum(s, 0..s).scale(-1.0));
    Cpop::new(f, vec![Constraint { g, kind: ConstraintKind::Equality }])
}

/// Quartic with unit-norm variables: `min [z]_2^* Q [z]_2` s.t. `1 - |z_i|^2 = 0`.
pub fn gen_unitnorm_instance(s: usize, seed: u64) -> Result<Cpop> {
    let n = crate::monomial::basis_len(s, 2).ok_or(Error::BasisTooLarge { s, d: 2 })?;
    let q = uniform_hermitian(n, &mut rng(seed, STREAM_OBJECTIVE));
    let f = quadratic_form_objective(s, &q)?;
    let constraints = (0..s)
        .map(|i| Constraint {
            g: CPolynomial::constant(s, 1.0).plus(&modulus_sum(s, [i]).scale(-1.0)),
            kind: ConstraintKind::Equality,
        })
        .collect();
    Cpop::new(f, constraints)
}

/// Benchmark family of a generated instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Sphere,
    Unitnorm,
}

impl Family {
    pub fn generate(self, s: usize, seed: u64) -> Result<Cpop> {
        match self {
            Family::Sphere => gen_sphere_instance(s, seed),
            Family::Unitnorm => gen_unitnorm_instance(s, seed),
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Family::Sphere => "sphere",
            Family::Unitnorm => "unitnorm",
        })
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sphere" => Ok(Family::Sphere),
            "unitnorm" => Ok(Family::Unitnorm),
            other => Err(Error::Unsupported(format!("instance family `{other}`"))),
        }
    }
}
