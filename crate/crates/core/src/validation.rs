//! Oracles that check relaxation bounds and the agreement of the two real
//! forms without relying on the relaxation pipeline.

use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::cpop::{ConstraintKind, Cpop};
use crate::error::{Error, Result};
use crate::monomial::Exponent;
use crate::program::SolveStatus;
use crate::reformulate::Form;
use crate::relaxation::{assemble_hsos, size_report};
use crate::solver::{solve, SolverOptions};

/// Best feasible objective value found by [`sample_upper_bound`].
#[derive(Debug, Clone, PartialEq)]
pub struct SampleReport {
    pub best_value: f64,
    pub best_point: Vec<Complex64>,
    pub samples: usize,
    pub seed: u64,
}

/// Feasible sets that can be sampled directly.
#[derive(Debug, Clone, PartialEq)]
enum FeasibleSet {
    /// `sum |z_i|^2 = r^2`.
    Sphere { radius: f64 },
    /// `|z_i| = r_i` for every `i`.
    Torus { radii: Vec<f64> },
}

/// Reads `c - sum_{i in vars} |z_i|^2 = 0` as `(c, vars)`.
fn modulus_constraint(g: &crate::polynomial::CPolynomial) -> Option<(f64, Vec<usize>)> {
    let s = g.s();
    let mut c = None;
    let mut vars = Vec::new();
    for (b, gm, v) in g.terms() {
        if v.im != 0.0 {
            return None;
        }
        if b.is_zero() && gm.is_zero() {
            c = Some(v.re);
        } else if b == gm && b.degree() == 1 && v.re == -1.0 {
            vars.push(b.entries().iter().position(|&e| e == 1)?);
        } else {
            return None;
        }
    }
    debug_assert!(vars.iter().all(|&i| i < s));
    c.filter(|&c| c > 0.0).map(|c| (c, vars))
}

fn feasible_set(p: &Cpop) -> Result<FeasibleSet> {
    let s = p.s();
    let unsupported = || {
        Error::Unsupported("direct sampling needs a sphere or unit-norm constraint set".into())
    };
    let mut parsed = Vec::new();
    for c in p.constraints() {
        if c.kind != ConstraintKind::Equality {
            return Err(unsupported());
        }
        parsed.push(modulus_constraint(&c.g).ok_or_else(unsupported)?);
    }
    match parsed.as_slice() {
        [(c, vars)] if vars.len() == s => Ok(FeasibleSet::Sphere { radius: c.sqrt() }),
        _ if parsed.len() == s => {
            let mut radii = vec![f64::NAN; s];
            for (c, vars) in &parsed {
                match vars.as_slice() {
                    [i] if radii[*i].is_nan() => radii[*i] = c.sqrt(),
                    _ => return Err(unsupported()),
                }
            }
            Ok(FeasibleSet::Torus { radii })
        }
        _ => Err(unsupported()),
    }
}

/// Smallest objective value over `n_samples` random feasible points.
///
/// Sphere constraints are sampled by normalizing a complex Gaussian vector,
/// unit-norm constraints by independent uniform phases.
pub fn sample_upper_bound(p: &Cpop, n_samples: usize, seed: u64) -> Result<SampleReport> {
    if n_samples == 0 {
        return Err(Error::Invalid("at least one sample is required".into()));
    }
    let set = feasible_set(p)?;
    let s = p.s();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, Vec<Complex64>)> = None;
    let mut z = vec![Complex64::new(0.0, 0.0); s];
    for _ in 0..n_samples {
        match &set {
            FeasibleSet::Sphere { radius } => {
                for zi in z.iter_mut() {
                    *zi = Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
                }
                let norm = z.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
                if norm == 0.0 {
                    continue;
                }
                for zi in z.iter_mut() {
                    *zi *= radius / norm;
                }
            }
            FeasibleSet::Torus { radii } => {
                for (zi, r) in z.iter_mut().zip(radii) {
                    let theta = rng.random::<f64>() * std::f64::consts::TAU;
                    *zi = Complex64::from_polar(*r, theta);
                }
            }
        }
        let v = p.objective().eval(&z)?;
        if best.as_ref().is_none_or(|(b, _)| v < *b) {
            best = Some((v, z.clone()));
        }
    }
    let (best_value, best_point) = best.ok_or_else(|| Error::Invalid("no usable sample".into()))?;
    Ok(SampleReport { best_value, best_point, samples: n_samples, seed })
}

/// `min f(r e^{i theta})` over `theta = 2 pi k / grid`, `k = 0..grid`, for a
/// one-variable problem constrained to a circle of radius `r`.
pub fn grid_min_1d(p: &Cpop, grid: usize) -> Result<f64> {
    if p.s() != 1 || p.constraints().len() != 1 {
        return Err(Error::Invalid("grid search needs s = 1 and a single modulus constraint".into()));
    }
    if grid == 0 {
        return Err(Error::Invalid("grid must have at least one point".into()));
    }
    let r = match feasible_set(p)? {
        FeasibleSet::Sphere { radius } => radius,
        FeasibleSet::Torus { radii } => radii[0],
    };
    // f(z) = sum c z^a conj(z)^b = sum c r^(a+b) e^{i (a-b) theta}
    let terms: Vec<(i64, Complex64)> = p
        .objective()
        .terms()
        .map(|(a, b, c)| {
            let (a, b) = (exp1(a), exp1(b));
            (a as i64 - b as i64, c * r.powi((a + b) as i32))
        })
        .collect();
    let mut best = f64::INFINITY;
    for k in 0..grid {
        let theta = std::f64::consts::TAU * k as f64 / grid as f64;
        let v: f64 = terms
            .iter()
            .map(|&(m, c)| (c * Complex64::from_polar(1.0, m as f64 * theta)).re)
            .sum();
        best = best.min(v);
    }
    Ok(best)
}

fn exp1(e: &Exponent) -> u32 {
    e.entries()[0]
}

/// Optima and wall times of both real forms of the order-`d` relaxation.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Comparison {
    pub n_sdp: usize,
    pub m_naive: usize,
    pub m_dualview: usize,
    pub opt_naive: f64,
    pub opt_dualview: f64,
    pub abs_diff: f64,
    pub status_naive: SolveStatus,
    pub status_dualview: SolveStatus,
    /// Seconds spent in the solver, median over the timed runs.
    pub time_naive: f64,
    pub time_dualview: f64,
}

impl Comparison {
    pub fn both_optimal(&self) -> bool {
        self.status_naive == SolveStatus::Optimal && self.status_dualview == SolveStatus::Optimal
    }

    /// `|opt_naive - opt_dualview| <= rel * (1 + |opt_dualview|)`.
    pub fn agrees(&self, rel: f64) -> bool {
        self.abs_diff <= rel * (1.0 + self.opt_dualview.abs())
    }
}

/// Assembles and solves both forms once each.
pub fn compare_reformulations(p: &Cpop, d: usize, opts: &SolverOptions) -> Result<Comparison> {
    compare_reformulations_timed(p, d, opts, 1)
}

/// Like [`compare_reformulations`] with each solve repeated `runs` times;
/// the reported times are medians.
pub fn compare_reformulations_timed(
    p: &Cpop,
    d: usize,
    opts: &SolverOptions,
    runs: usize,
) -> Result<Comparison> {
    let runs = runs.max(1);
    let sizes = size_report(p, d)?;
    let run_form = |form: Form| -> Result<(usize, f64, SolveStatus, f64)> {
        let art = assemble_hsos(p, d, form)?;
        let mut times = Vec::with_capacity(runs);
        let mut last = None;
        for _ in 0..runs {
            let t = Instant::now();
            let res = solve(art.program(), opts)?;
            times.push(t.elapsed().as_secs_f64());
            last = Some(res);
        }
        let res = last.expect("at least one run");
        Ok((art.program().n_rows(), res.objective, res.status, median(&mut times)))
    };
    let (m_naive, opt_naive, status_naive, time_naive) = run_form(Form::Naive)?;
    let (m_dualview, opt_dualview, status_dualview, time_dualview) = run_form(Form::Dualview)?;
    Ok(Comparison {
        n_sdp: sizes.n_sdp,
        m_naive,
        m_dualview,
        opt_naive,
        opt_dualview,
        abs_diff: (opt_naive - opt_dualview).abs(),
        status_naive,
        status_dualview,
        time_naive,
        time_dualview,
    })
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cpop::{gen_sphere_instance, gen_unitnorm_instance, Constraint};
    use crate::polynomial::CPolynomial;

    fn ex(v: u32) -> Exponent {
        Exponent::new(vec![v])
    }

    fn circle() -> Constraint {
        let mut g = CPolynomial::constant(1, 1.0);
        g.add_term(ex(1), ex(1), Complex64::new(-1.0, 0.0));
        Constraint { g, kind: ConstraintKind::Equality }
    }

    #[test]
    fn modulus_on_the_sphere_is_one() {
        let f = CPolynomial::from_terms(1, [(ex(1), ex(1), Complex64::new(1.0, 0.0))]).unwrap();
        let p = Cpop::new(f, vec![circle()]).unwrap();
        let r = sample_upper_bound(&p, 50, 3).unwrap();
        assert!((r.best_value - 1.0).abs() < 1e-12);
        assert!((r.best_point[0].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn grid_cosine() {
        let one = Complex64::new(1.0, 0.0);
        let f = CPolynomial::from_terms(1, [(ex(2), ex(0), one), (ex(0), ex(2), one)]).unwrap();
        let p = Cpop::new(f, vec![circle()]).unwrap();
        assert!((grid_min_1d(&p, 4).unwrap() + 2.0).abs() < 1e-12);
        let f4 = CPolynomial::from_terms(1, [(ex(2), ex(2), one)]).unwrap();
        let p4 = Cpop::new(f4, vec![circle()]).unwrap();
        assert!((grid_min_1d(&p4, 7).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn samples_are_feasible_and_replayable() {
        let p = gen_unitnorm_instance(3, 5).unwrap();
        let a = sample_upper_bound(&p, 200, 9).unwrap();
        assert!(a.best_point.iter().all(|z| (z.norm() - 1.0).abs() < 1e-9));
        assert_eq!(a, sample_upper_bound(&p, 200, 9).unwrap());
        assert_eq!(a.best_value, p.objective().eval(&a.best_point).unwrap());
        let q = gen_sphere_instance(3, 5).unwrap();
        let b = sample_upper_bound(&q, 200, 9).unwrap();
        assert!((b.best_point.iter().map(|z| z.norm_sqr()).sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn unsupported_sets() {
        let f = CPolynomial::constant(1, 1.0);
        let p = Cpop::new(f.clone(), vec![]).unwrap();
        assert!(matches!(sample_upper_bound(&p, 1, 0), Err(Error::Unsupported(_))));
        let ineq = Constraint { kind: ConstraintKind::Inequality, ..circle() };
        let p = Cpop::new(f, vec![ineq]).unwrap();
        assert!(matches!(sample_upper_bound(&p, 1, 0), Err(Error::Unsupported(_))));
        let two = gen_sphere_instance(2, 0).unwrap();
        assert!(grid_min_1d(&two, 10).is_err());
    }

    #[test]
    fn both_forms_agree_on_small_sphere() {
        let p = gen_sphere_instance(2, 7).unwrap();
        let c = compare_reformulations(&p, 2, &SolverOptions::default()).unwrap();
        assert!(c.both_optimal());
        assert!(c.agrees(1e-5), "{c:?}");
        assert!(c.m_dualview < c.m_naive);
        let sizes = size_report(&p, 2).unwrap();
        assert_eq!((c.m_naive, c.m_dualview), (sizes.m_naive, sizes.m_dualview));
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0]), 2.5);
    }
}
