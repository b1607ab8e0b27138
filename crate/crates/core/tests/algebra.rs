use cxsdp::cpop::{quadratic_form_objective, Family};
use cxsdp::monomial::{basis_len, monomial_basis, monomial_value, Exponent};
use cxsdp::polynomial::CPolynomial;
use cxsdp::validation::sample_upper_bound;
use num_complex::Complex64;
use proptest::prelude::*;

fn point(s: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((-1.5..1.5f64, -1.5..1.5f64).prop_map(|(a, b)| Complex64::new(a, b)), s)
}

fn exponent(s: usize, max: u32) -> impl Strategy<Value = Exponent> {
    prop::collection::vec(0..=max, s).prop_map(Exponent::new)
}

/// Random polynomial in two variables, optionally made Hermitian.
fn polynomial() -> impl Strategy<Value = CPolynomial> {
    prop::collection::vec((exponent(2, 2), exponent(2, 2), -2.0..2.0f64, -2.0..2.0f64), 0..6).prop_map(|terms| {
        CPolynomial::from_terms(2, terms.into_iter().map(|(b, g, re, im)| (b, g, Complex64::new(re, im)))).unwrap()
    })
}

proptest! {
    #[test]
    fn basis_is_sorted_complete_and_indexed(s in 1usize..5, d in 0usize..5) {
        let basis = monomial_basis(s, d).unwrap();
        prop_assert_eq!(Some(basis.len()), basis_len(s, d));
        for (i, e) in basis.list().iter().enumerate() {
            prop_assert!(e.degree() <= d);
            prop_assert_eq!(basis.position(e), Some(i));
        }
        for w in basis.list().windows(2) {
            prop_assert!(w[0] < w[1]);
            prop_assert!(w[0].degree() <= w[1].degree());
        }
    }

    #[test]
    fn binomial_recursion(s in 1usize..30, d in 1usize..12) {
        // C(s+d, d) = C(s+d-1, d) + C(s+d-1, d-1)
        let lhs = basis_len(s, d).unwrap();
        let rhs = basis_len(s - 1, d).unwrap() + basis_len(s, d - 1).unwrap();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn monomials_multiply(a in exponent(3, 3), b in exponent(3, 3), z in point(3)) {
        let prod = monomial_value(&a, &z) * monomial_value(&b, &z);
        let direct = monomial_value(&a.add(&b), &z);
        prop_assert!((prod - direct).norm() <= 1e-9 * (1.0 + direct.norm()));
        prop_assert_eq!(a.add(&b).degree(), a.degree() + b.degree());
    }

    #[test]
    fn hermitian_completion_gives_real_values(mut p in polynomial(), z in point(2)) {
        let already = p.is_hermitian();
        let added = p.complete_hermitian();
        // a stored pair that disagrees is reported instead of overwritten
        if let Ok(n) = added {
            prop_assert!(p.is_hermitian());
            prop_assert!(already || n > 0 || p.is_zero());
            let v = p.eval_complex(&z).unwrap();
            prop_assert!(v.im.abs() <= 1e-9 * (1.0 + v.re.abs()));
            prop_assert!((p.eval(&z).unwrap() - v.re).abs() <= 1e-12 * (1.0 + v.re.abs()));
        }
    }

    #[test]
    fn evaluation_is_linear(p in polynomial(), q in polynomial(), a in -3.0..3.0f64, z in point(2)) {
        let lhs = p.plus(&q.scale(a)).eval_complex(&z).unwrap();
        let rhs = p.eval_complex(&z).unwrap() + q.eval_complex(&z).unwrap() * a;
        prop_assert!((lhs - rhs).norm() <= 1e-9 * (1.0 + rhs.norm()));
    }

    #[test]
    fn degrees(p in polynomial()) {
        prop_assert!(p.side_degree() <= p.degree());
        prop_assert!(p.degree() <= 2 * p.side_degree());
    }

    #[test]
    fn quadratic_forms_evaluate_as_v_star_q_v(seed in any::<u64>(), z in point(2)) {
        // Q Hermitian from a seed, f(z) = v^* Q v with v the degree-2 monomials
        let basis = monomial_basis(2, 2).unwrap();
        let n = basis.len();
        let mut state = seed;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let mut q = vec![vec![Complex64::new(0.0, 0.0); n]; n];
        for i in 0..n {
            q[i][i] = Complex64::new(next(), 0.0);
            for j in i + 1..n {
                q[i][j] = Complex64::new(next(), next());
                q[j][i] = q[i][j].conj();
            }
        }
        let f = quadratic_form_objective(2, &q).unwrap();
        prop_assert!(f.is_hermitian());
        let v = basis.evaluate(&z);
        let mut direct = Complex64::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                direct += v[i].conj() * q[i][j] * v[j];
            }
        }
        let val = f.eval(&z).unwrap();
        prop_assert!((val - direct.re).abs() <= 1e-9 * (1.0 + direct.norm()));
    }
}

#[test]
fn sampled_points_are_feasible() {
    for family in [Family::Sphere, Family::Unitnorm] {
        for s in 1..=3 {
            let p = family.generate(s, 4).unwrap();
            let r = sample_upper_bound(&p, 500, 9).unwrap();
            assert_eq!(r.samples, 500);
            for c in p.constraints() {
                assert!(c.g.eval(&r.best_point).unwrap().abs() < 1e-12, "{family} s={s}");
            }
            assert!((p.objective().eval(&r.best_point).unwrap() - r.best_value).abs() < 1e-12);
            assert_eq!(sample_upper_bound(&p, 500, 9).unwrap().best_value, r.best_value);
        }
    }
}

#[test]
fn wrong_point_length_is_an_error() {
    let p = CPolynomial::constant(2, 1.0);
    assert!(p.eval(&[Complex64::new(0.0, 0.0)]).is_err());
}
