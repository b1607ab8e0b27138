use cxsdp::complex::{
    embed_feasible, inner_product, realify_psd, recover_complex_solution, ComplexMatrix, ComplexSDP, ComplexVector,
    HermitianMatrix,
};
use cxsdp::linalg::{min_eigenvalue, sym_eigenvalues};
use cxsdp::reformulate::{
    complex_objective, reformulate_dual, reformulate_primal_dualview, reformulate_primal_naive, HermitianVar, SymVar,
};
use cxsdp::solver::{solve, SolverOptions};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cnum(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

/// `G G^* + 0.1 I` for a random complex `G`.
fn planted_psd(rng: &mut ChaCha8Rng, n: usize) -> HermitianMatrix {
    let g: Vec<Vec<Complex64>> = (0..n).map(|_| (0..n).map(|_| cnum(rng)).collect()).collect();
    HermitianMatrix::from_upper(n, |i, j| {
        let v: Complex64 = (0..n).map(|k| g[i][k] * g[j][k].conj()).sum();
        if i == j {
            v + 0.1
        } else {
            v
        }
    })
}

fn random_complex(rng: &mut ChaCha8Rng, n: usize) -> ComplexMatrix {
    let vals: Vec<Vec<Complex64>> = (0..n).map(|_| (0..n).map(|_| cnum(rng)).collect()).collect();
    ComplexMatrix::from_fn(n, |i, j| vals[i][j]).unwrap()
}

fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> HermitianMatrix {
    let vals: Vec<Vec<Complex64>> = (0..n).map(|_| (0..n).map(|_| cnum(rng)).collect()).collect();
    HermitianMatrix::from_upper(n, |i, j| vals[i][j])
}

/// Feasible complex SDP whose right-hand side comes from a planted PSD point.
/// The first constraint fixes the trace, which bounds the feasible set.
fn planted_problem(seed: u64) -> (ComplexSDP, HermitianMatrix) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=5);
    let m = rng.random_range(1..=(n * n / 2).min(8));
    let h = planted_psd(&mut rng, n);
    let mut a = vec![HermitianMatrix::identity(n).to_complex()];
    while a.len() < m {
        a.push(random_complex(&mut rng, n));
    }
    let b: Vec<Complex64> = a.iter().map(|ai| inner_product(ai, &h).unwrap()).collect();
    let c = random_hermitian(&mut rng, n);
    (ComplexSDP::new(c, a, ComplexVector::from_complex(&b).unwrap()).unwrap(), h)
}

#[test]
fn recovered_points_are_feasible_and_optimal() {
    for seed in 0..10 {
        let (p, _) = planted_problem(seed);
        let res = solve(&reformulate_primal_dualview(&p), &SolverOptions::default()).unwrap();
        assert!(res.is_optimal(), "seed {seed}: {}", res.status);
        let h = recover_complex_solution(&res.primal_blocks[0]).unwrap();
        assert!(min_eigenvalue(&realify_psd(&h)) >= -1e-6, "seed {seed}");
        let ah = p.apply(&h).unwrap();
        for (i, v) in ah.iter().enumerate() {
            let r = (v - p.rhs().get(i)).norm();
            assert!(r <= 1e-6, "seed {seed} row {i}: {r}");
        }
        let obj = complex_objective(&p, &h);
        assert!((obj - res.objective).abs() <= 1e-6, "seed {seed}: {obj} vs {}", res.objective);
    }
}

#[test]
fn three_real_forms_share_the_optimum() {
    for seed in 20..26 {
        let (p, planted) = planted_problem(seed);
        let opts = SolverOptions::default();
        let dv = solve(&reformulate_primal_dualview(&p), &opts).unwrap();
        let naive = solve(&reformulate_primal_naive(&p), &opts).unwrap();
        let dual = solve(&reformulate_dual(&p), &opts).unwrap();
        assert!(dv.is_optimal() && naive.is_optimal() && dual.is_optimal(), "seed {seed}");
        let scale = 1.0 + dv.objective.abs();
        assert!((naive.objective - dv.objective).abs() <= 1e-6 * scale, "seed {seed}");
        assert!((dual.objective - dv.objective).abs() <= 1e-6 * scale, "seed {seed}");
        // the planted point is feasible, so it cannot beat the maximum
        assert!(complex_objective(&p, &planted) <= dv.objective + 1e-6 * scale);
    }
}

#[test]
fn naive_solution_has_the_embedded_pattern() {
    let (p, _) = planted_problem(3);
    let res = solve(&reformulate_primal_naive(&p), &SolverOptions::default()).unwrap();
    let y = &res.primal_blocks[0];
    let n = p.dim();
    for i in 0..n {
        for j in 0..n {
            assert!((y[(i, j)] - y[(n + i, n + j)]).abs() < 1e-6);
            assert!((y[(i, n + j)] + y[(n + i, j)]).abs() < 1e-6);
        }
    }
}

#[test]
fn odd_dimension_cannot_be_recovered() {
    assert!(recover_complex_solution(&faer::Mat::zeros(3, 3)).is_err());
}

fn hermitian() -> impl Strategy<Value = HermitianMatrix> {
    (1usize..5, any::<u64>()).prop_map(|(n, seed)| random_hermitian(&mut ChaCha8Rng::seed_from_u64(seed), n))
}

proptest! {
    #[test]
    fn embedding_round_trips(h in hermitian()) {
        prop_assert_eq!(recover_complex_solution(&embed_feasible(&h)).unwrap(), h);
    }

    #[test]
    fn realified_spectrum_is_doubled(h in hermitian()) {
        // each eigenvalue of H appears twice in [H_R, -H_I; H_I, H_R]
        let ev = sym_eigenvalues(&realify_psd(&h));
        for k in 0..h.dim() {
            prop_assert!((ev[2 * k] - ev[2 * k + 1]).abs() <= 1e-10 * (1.0 + ev[2 * k].abs()));
        }
    }

    #[test]
    fn embedding_preserves_semidefiniteness(n in 1usize..5, seed in any::<u64>()) {
        let h = planted_psd(&mut ChaCha8Rng::seed_from_u64(seed), n);
        prop_assert!(min_eigenvalue(&embed_feasible(&h)) >= -1e-12);
        prop_assert!(min_eigenvalue(&realify_psd(&h)) > 0.0);
    }

    #[test]
    fn inner_forms_agree_with_the_complex_product(h in hermitian(), seed in any::<u64>()) {
        let n = h.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_complex(&mut rng, n);
        let direct = inner_product(&a, &h).unwrap();
        let tol = 1e-12 * (1.0 + direct.norm());
        for (var, x) in [
            (HermitianVar::DualView { block: 0, n }, embed_feasible(&h)),
            (HermitianVar::Embedded { var: SymVar::Psd { block: 0 }, n }, realify_psd(&h)),
        ] {
            let (re, im) = var.inner_forms(&a);
            prop_assert!((re.eval(std::slice::from_ref(&x), &[]) - direct.re).abs() <= tol);
            prop_assert!((im.eval(std::slice::from_ref(&x), &[]) - direct.im).abs() <= tol);
        }
    }

    #[test]
    fn hermitian_objective_is_real(h in hermitian(), seed in any::<u64>()) {
        let c = random_hermitian(&mut ChaCha8Rng::seed_from_u64(seed), h.dim());
        let v = inner_product(&c.to_complex(), &h).unwrap();
        prop_assert!(v.im.abs() <= 1e-12 * (1.0 + v.re.abs()));
    }
}
