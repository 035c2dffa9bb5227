use proptest::prelude::*;

use lpla::adversarial::{hadamard_instance, measure_lower_bound};
use lpla::bicriteria::{bicriteria_with_guessing, BicriteriaOptions};
use lpla::linalg;
use lpla::matrix::lp_norm;
use lpla::regression::{solve_vector, LpSolver};
use lpla::verification::{lambda_apply, opt_oracle, LambdaInstance, OracleConfig};
use lpla::{css_exact, DenseMatrix, PNorm, RegressionConfig};

fn pnorm() -> impl Strategy<Value = PNorm> {
    prop_oneof![
        Just(PNorm::ONE),
        Just(PNorm::TWO),
        Just(PNorm::Infinity),
        (1.0..6.0f64).prop_map(|p| PNorm::new(p).unwrap()),
    ]
}

fn matrix(n: usize, m: usize) -> impl Strategy<Value = DenseMatrix> {
    prop::collection::vec(-5.0..5.0f64, n * m).prop_map(move |v| DenseMatrix::new(n, m, v).unwrap())
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-12)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn norm_is_homogeneous_and_subadditive(
        x in prop::collection::vec(-10.0..10.0f64, 1..12),
        c in -4.0..4.0f64,
        p in pnorm(),
    ) {
        let scaled: Vec<f64> = x.iter().map(|v| c * v).collect();
        prop_assert!(close(lp_norm(&scaled, p), c.abs() * lp_norm(&x, p), 1e-12));
        let y: Vec<f64> = x.iter().rev().copied().collect();
        let sum: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
        prop_assert!(lp_norm(&sum, p) <= (lp_norm(&x, p) + lp_norm(&y, p)) * (1.0 + 1e-12));
    }

    #[test]
    fn norm_decreases_in_p(x in prop::collection::vec(-10.0..10.0f64, 1..12), p in 1.0..5.0f64, dq in 0.0..5.0f64) {
        let lo = PNorm::new(p).unwrap();
        let hi = PNorm::new(p + dq).unwrap();
        prop_assert!(lp_norm(&x, hi) <= lp_norm(&x, lo) * (1.0 + 1e-12));
        prop_assert!(lp_norm(&x, PNorm::Infinity) <= lp_norm(&x, hi) * (1.0 + 1e-12));
    }

    #[test]
    fn determinant_is_multiplicative(a in matrix(3, 3), b in matrix(3, 3)) {
        let ab = a.matmul(&b).unwrap().determinant().unwrap();
        let prod = a.determinant().unwrap() * b.determinant().unwrap();
        prop_assert!((ab - prod).abs() <= 1e-9 * (1.0 + prod.abs()));
    }

    #[test]
    fn l2_regression_matches_pseudo_inverse(u in matrix(6, 2), b in prop::collection::vec(-5.0..5.0f64, 6)) {
        prop_assume!(u.numerical_rank(1e-6) == 2);
        let sol = solve_vector(&u, &b, &RegressionConfig::new(PNorm::TWO)).unwrap();
        let (pinv, _) = linalg::pseudo_inverse(&u, 1e-12);
        let x = pinv.mul_vec(&b).unwrap();
        let r: Vec<f64> = u.mul_vec(&x).unwrap().iter().zip(&b).map(|(a, c)| a - c).collect();
        prop_assert!(close(sol.objective, lp_norm(&r, PNorm::TWO), 1e-9));
    }

    #[test]
    fn regression_is_scale_equivariant(
        u in matrix(6, 2),
        b in prop::collection::vec(-5.0..5.0f64, 6),
        c in prop_oneof![-8.0..-0.125f64, 0.125..8.0f64],
        p in pnorm(),
    ) {
        let cfg = RegressionConfig::new(p);
        let base = solve_vector(&u, &b, &cfg).unwrap().objective;
        let cb: Vec<f64> = b.iter().map(|v| c * v).collect();
        let scaled = solve_vector(&u, &cb, &cfg).unwrap().objective;
        prop_assert!(close(scaled, c.abs() * base, 1e-6), "{scaled} vs {}", c.abs() * base);
    }

    #[test]
    fn regression_beats_perturbations(
        u in matrix(6, 2),
        b in prop::collection::vec(-5.0..5.0f64, 6),
        d in prop::collection::vec(-0.5..0.5f64, 2),
        p in pnorm(),
    ) {
        let sol = solve_vector(&u, &b, &RegressionConfig::new(p)).unwrap();
        let moved: Vec<f64> = sol.coefficients.iter().zip(&d).map(|(x, e)| x + e).collect();
        let r: Vec<f64> = u.mul_vec(&moved).unwrap().iter().zip(&b).map(|(a, c)| a - c).collect();
        prop_assert!(sol.objective <= lp_norm(&r, p) * (1.0 + 1e-6) + 1e-12);
    }

    #[test]
    fn smoothed_objective_never_increases(
        u in matrix(6, 2),
        b in prop::collection::vec(-5.0..5.0f64, 6),
        p in 1.0..2.0f64,
    ) {
        let solver = LpSolver::new(&u, RegressionConfig::new(PNorm::new(p).unwrap())).unwrap();
        let (_, hist) = solver.solve_with_history(&b).unwrap();
        for w in hist.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-9), "{hist:?}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn css_is_permutation_invariant(a in matrix(4, 5), shift in 1usize..5, p in pnorm()) {
        let cfg = RegressionConfig::new(p);
        let base = css_exact(&a, 2, &cfg).unwrap();
        let perm: Vec<usize> = (0..5).map(|j| (j + shift) % 5).collect();
        let permuted = css_exact(&a.select_columns(&perm), 2, &cfg).unwrap();
        prop_assert!(close(base.error, permuted.error, 1e-6), "{} vs {}", base.error, permuted.error);
    }

    #[test]
    fn css_scales_with_the_matrix(a in matrix(4, 5), c in prop_oneof![-4.0..-0.25f64, 0.25..4.0f64], p in pnorm()) {
        let cfg = RegressionConfig::new(p);
        let base = css_exact(&a, 2, &cfg).unwrap().error;
        let scaled = css_exact(&a.scale(c), 2, &cfg).unwrap().error;
        prop_assert!(close(scaled, c.abs() * base, 1e-6));
    }

    #[test]
    fn css_error_decreases_with_rank(a in matrix(4, 5), p in pnorm()) {
        let cfg = RegressionConfig::new(p);
        let errs: Vec<f64> = (1..=4).map(|k| css_exact(&a, k, &cfg).unwrap().error).collect();
        for w in errs.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-6) + 1e-12, "{errs:?}");
        }
    }

    #[test]
    fn lambda_is_bilinear(
        a1 in prop::collection::vec(-3.0..3.0f64, 5),
        a2 in prop::collection::vec(-3.0..3.0f64, 5),
        b in prop::collection::vec(-3.0..3.0f64, 10),
        s in -2.0..2.0f64,
    ) {
        let run = |a: Vec<f64>, b: Vec<f64>| lambda_apply(&LambdaInstance::new(5, 2, a, b).unwrap());
        let mixed: Vec<f64> = a1.iter().zip(&a2).map(|(x, y)| x + s * y).collect();
        let lhs = run(mixed, b.clone());
        let r1 = run(a1, b.clone());
        let r2 = run(a2, b.clone());
        for i in 0..lhs.len() {
            prop_assert!((lhs[i] - (r1[i] + s * r2[i])).abs() <= 1e-9 * (1.0 + lhs[i].abs()));
        }
        let sb: Vec<f64> = b.iter().map(|v| s * v).collect();
        let ones = vec![1.0; 5];
        let scaled = run(ones.clone(), sb);
        let unscaled = run(ones, b);
        for (x, y) in scaled.iter().zip(&unscaled) {
            prop_assert!((x - s * y).abs() <= 1e-9 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn lambda_is_alternating(
        a in prop::collection::vec(-3.0..3.0f64, 5),
        b in prop::collection::vec(-3.0..3.0f64, 10),
        seq in prop::collection::vec(0usize..5, 3),
        swap in 0usize..2,
    ) {
        let inst = LambdaInstance::new(5, 2, a, b).unwrap();
        let mut swapped = seq.clone();
        swapped.swap(swap, swap + 1);
        let (x, y) = (inst.lambda_ordered(&seq), inst.lambda_ordered(&swapped));
        prop_assert!((x + y).abs() <= 1e-9 * (1.0 + x.abs()));
    }

    #[test]
    fn hadamard_ratio_falls_as_eps_grows(e1 in 1e-4..0.2f64, de in 1e-3..0.3f64) {
        let p = PNorm::Infinity;
        let cfg = RegressionConfig::new(p);
        let lo = measure_lower_bound(&hadamard_instance(2, e1, p).unwrap(), &cfg).unwrap();
        let hi = measure_lower_bound(&hadamard_instance(2, e1 + de, p).unwrap(), &cfg).unwrap();
        prop_assert!(hi.ratio <= lo.ratio * (1.0 + 1e-6));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn bicriteria_is_deterministic(a in matrix(6, 10), seed in any::<u64>(), p in pnorm()) {
        let cfg = RegressionConfig::new(p);
        let run = || bicriteria_with_guessing(&a, 2, &cfg, seed, BicriteriaOptions::default()).unwrap();
        let first = run();
        let second = run();
        prop_assert_eq!(first.selected, second.selected);
        prop_assert_eq!(first.error.to_bits(), second.error.to_bits());
    }

    #[test]
    fn oracle_improves_with_restarts(a in matrix(4, 5), seed in any::<u64>(), p in 1.0..4.0f64) {
        let reg = RegressionConfig::new(PNorm::new(p).unwrap());
        let few = OracleConfig { restarts: 1, inner_iters: 10, seed };
        let many = OracleConfig { restarts: 4, ..few };
        let (x, y) = (opt_oracle(&a, 1, &few, &reg).unwrap(), opt_oracle(&a, 1, &many, &reg).unwrap());
        prop_assert!(y <= x);
    }
}
