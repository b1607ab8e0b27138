//! Complex matrices with split real/imaginary storage and the complex SDP
//! data model.
//!
//! The inner product throughout is the bilinear trace form
//! `<A, B> = Tr(A^T B) = sum_{j,k} A[j,k] B[j,k]` (no conjugation).

use faer::Mat;
use num_complex::Complex64;

use crate::error::{Error, Result};

fn all_finite(m: &Mat<f64>) -> bool {
    (0..m.ncols()).all(|j| (0..m.nrows()).all(|i| m[(i, j)].is_finite()))
}

fn check_square(re: &Mat<f64>, im: &Mat<f64>) -> Result<usize> {
    let n = re.nrows();
    if re.ncols() != n || im.nrows() != n || im.ncols() != n {
        return Err(Error::Dimension(format!(
            "real part {}x{}, imaginary part {}x{}",
            re.nrows(),
            re.ncols(),
            im.nrows(),
            im.ncols()
        )));
    }
    Ok(n)
}

/// General square complex matrix `re + i*im`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    re: Mat<f64>,
    im: Mat<f64>,
}

impl ComplexMatrix {
    pub fn new(re: Mat<f64>, im: Mat<f64>) -> Result<Self> {
        check_square(&re, &im)?;
        if !all_finite(&re) || !all_finite(&im) {
            return Err(Error::NonFinite("complex matrix"));
        }
        Ok(Self { re, im })
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> Complex64) -> Result<Self> {
        let re = Mat::from_fn(n, n, |i, j| f(i, j).re);
        let im = Mat::from_fn(n, n, |i, j| f(i, j).im);
        Self::new(re, im)
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            re: Mat::zeros(n, n),
            im: Mat::zeros(n, n),
        }
    }

    pub fn dim(&self) -> usize {
        self.re.nrows()
    }

    pub fn re(&self) -> &Mat<f64> {
        &self.re
    }

    pub fn im(&self) -> &Mat<f64> {
        &self.im
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        Complex64::new(self.re[(i, j)], self.im[(i, j)])
    }

    /// Nonzero entries in column-major order.
    pub fn nonzeros(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        let n = self.dim();
        (0..n)
            .flat_map(move |j| (0..n).map(move |i| (i, j)))
            .map(|(i, j)| (i, j, self.get(i, j)))
            .filter(|(_, _, a)| a.re != 0.0 || a.im != 0.0)
    }
}

/// Hermitian matrix: `re` exactly symmetric, `im` exactly antisymmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    re: Mat<f64>,
    im: Mat<f64>,
}

impl HermitianMatrix {
    pub fn new(re: Mat<f64>, im: Mat<f64>) -> Result<Self> {
        let n = check_square(&re, &im)?;
        if !all_finite(&re) || !all_finite(&im) {
            return Err(Error::NonFinite("Hermitian matrix"));
        }
        for j in 0..n {
            if im[(j, j)] != 0.0 {
                return Err(Error::NotHermitian(format!("imaginary diagonal at {j}")));
            }
            for i in 0..j {
                if re[(i, j)] != re[(j, i)] {
                    return Err(Error::NotHermitian(format!("real part asymmetric at ({i},{j})")));
                }
                if im[(i, j)] != -im[(j, i)] {
                    return Err(Error::NotHermitian(format!(
                        "imaginary part not antisymmetric at ({i},{j})"
                    )));
                }
            }
        }
        Ok(Self { re, im })
    }

    /// Builds a Hermitian matrix from its upper triangle; the diagonal's
    /// imaginary part is discarded.
    pub fn from_upper(n: usize, f: impl Fn(usize, usize) -> Complex64) -> Self {
        let mut re = Mat::zeros(n, n);
        let mut im = Mat::zeros(n, n);
        for j in 0..n {
            for i in 0..=j {
                let v = f(i, j);
                re[(i, j)] = v.re;
                re[(j, i)] = v.re;
                if i != j {
                    im[(i, j)] = v.im;
                    im[(j, i)] = -v.im;
                }
            }
        }
        Self { re, im }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            re: Mat::identity(n, n),
            im: Mat::zeros(n, n),
        }
    }

    pub fn dim(&self) -> usize {
        self.re.nrows()
    }

    pub fn re(&self) -> &Mat<f64> {
        &self.re
    }

    pub fn im(&self) -> &Mat<f64> {
        &self.im
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        Complex64::new(self.re[(i, j)], self.im[(i, j)])
    }

    pub fn to_complex(&self) -> ComplexMatrix {
        ComplexMatrix {
            re: self.re.clone(),
            im: self.im.clone(),
        }
    }
}

/// Complex vector with split storage.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexVector {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl ComplexVector {
    pub fn new(re: Vec<f64>, im: Vec<f64>) -> Result<Self> {
        if re.len() != im.len() {
            return Err(Error::Dimension(format!(
                "vector parts of length {} and {}",
                re.len(),
                im.len()
            )));
        }
        if re.iter().chain(&im).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("complex vector"));
        }
        Ok(Self { re, im })
    }

    pub fn from_complex(values: &[Complex64]) -> Result<Self> {
        Self::new(
            values.iter().map(|v| v.re).collect(),
            values.iter().map(|v| v.im).collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.re.len()
    }

    pub fn is_empty(&self) -> bool {
        self.re.is_empty()
    }

    pub fn get(&self, i: usize) -> Complex64 {
        Complex64::new(self.re[i], self.im[i])
    }
}

/// `sup <C, H>  s.t.  <A_i, H> = b_i,  H Hermitian PSD`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSDP {
    c: HermitianMatrix,
    a: Vec<ComplexMatrix>,
    b: ComplexVector,
}

impl ComplexSDP {
    pub fn new(c: HermitianMatrix, a: Vec<ComplexMatrix>, b: ComplexVector) -> Result<Self> {
        let n = c.dim();
        if n == 0 {
            return Err(Error::Dimension("complex SDP of dimension 0".into()));
        }
        if a.len() != b.len() {
            return Err(Error::Dimension(format!(
                "{} data matrices but {} right-hand sides",
                a.len(),
                b.len()
            )));
        }
        if let Some(k) = a.iter().position(|ai| ai.dim() != n) {
            return Err(Error::Dimension(format!(
                "data matrix {k} has dimension {}, expected {n}",
                a[k].dim()
            )));
        }
        Ok(Self { c, a, b })
    }

    pub fn dim(&self) -> usize {
        self.c.dim()
    }

    pub fn n_constraints(&self) -> usize {
        self.a.len()
    }

    pub fn objective(&self) -> &HermitianMatrix {
        &self.c
    }

    pub fn data(&self) -> &[ComplexMatrix] {
        &self.a
    }

    pub fn rhs(&self) -> &ComplexVector {
        &self.b
    }

    /// `A(H) = (<A_i, H>)_i`.
    pub fn apply(&self, h: &HermitianMatrix) -> Result<Vec<Complex64>> {
        self.a.iter().map(|ai| inner_product(ai, h)).collect()
    }
}

/// `Tr(A^T H)` from split parts.
pub fn inner_product(a: &ComplexMatrix, h: &HermitianMatrix) -> Result<Complex64> {
    let n = a.dim();
    if h.dim() != n {
        return Err(Error::Dimension(format!(
            "inner product of {n}x{n} and {m}x{m}",
            m = h.dim()
        )));
    }
    let (mut re, mut im) = (0.0, 0.0);
    for k in 0..n {
        for j in 0..n {
            let (ar, ai) = (a.re[(j, k)], a.im[(j, k)]);
            let (hr, hi) = (h.re[(j, k)], h.im[(j, k)]);
            re += ar * hr - ai * hi;
            im += ar * hi + ai * hr;
        }
    }
    Ok(Complex64::new(re, im))
}

/// `Y = [H_R, -H_I; H_I, H_R]`.
pub fn realify_psd(h: &HermitianMatrix) -> Mat<f64> {
    let n = h.dim();
    Mat::from_fn(2 * n, 2 * n, |r, c| {
        let (i, j) = (r % n, c % n);
        match (r < n, c < n) {
            (true, true) | (false, false) => h.re[(i, j)],
            (true, false) => -h.im[(i, j)],
            (false, true) => h.im[(i, j)],
        }
    })
}

/// `X = [H_R/2, H_I/2; -H_I/2, H_R/2]`, which maps back to `H` under
/// [`recover_complex_solution`] and is PSD whenever `H` is.
pub fn embed_feasible(h: &HermitianMatrix) -> Mat<f64> {
    let n = h.dim();
    Mat::from_fn(2 * n, 2 * n, |r, c| {
        let (i, j) = (r % n, c % n);
        match (r < n, c < n) {
            (true, true) | (false, false) => 0.5 * h.re[(i, j)],
            (true, false) => 0.5 * h.im[(i, j)],
            (false, true) => -0.5 * h.im[(i, j)],
        }
    })
}

/// `H = (X1 + X2) + (X3 - X3^T) i` for `X = [X1, X3; X3^T, X2]`.
///
/// Only the upper-right block is read for `X3`.
pub fn recover_complex_solution(x: &Mat<f64>) -> Result<HermitianMatrix> {
    let dim = x.nrows();
    if x.ncols() != dim || dim % 2 != 0 {
        return Err(Error::Dimension(format!(
            "expected an even square matrix, got {}x{}",
            x.nrows(),
            x.ncols()
        )));
    }
    let n = dim / 2;
    // Symmetrize X1 and X2 explicitly so the result is exactly Hermitian even
    // when `x` carries round-off asymmetry.
    let sym = |i: usize, j: usize| {
        if i <= j {
            x[(i, j)] + x[(n + i, n + j)]
        } else {
            x[(j, i)] + x[(n + j, n + i)]
        }
    };
    let re = Mat::from_fn(n, n, sym);
    let im = Mat::from_fn(n, n, |i, j| x[(i, n + j)] - x[(j, n + i)]);
    HermitianMatrix::new(re, im)
}
