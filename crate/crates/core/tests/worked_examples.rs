//! Small fixed instances checked against closed forms or independent
//! computations.

use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;

use lpla::adversarial::{self, NoiseKind};
use lpla::bicriteria::{self, BicriteriaOptions, CoverageConfig};
use lpla::css::{self, RatioBound};
use lpla::linalg;
use lpla::rank_reduction;
use lpla::regression::err_of_subset;
use lpla::verification::{self, LambdaInstance, OracleConfig};
use lpla::{ColumnSubset, DenseMatrix, PNorm, RegressionConfig};

/// Determinant by cofactor expansion along the first row.
fn cofactor_det(a: &DenseMatrix) -> f64 {
    let n = a.rows();
    if n == 1 {
        return a.get(0, 0);
    }
    (0..n)
        .map(|j| {
            let rows: Vec<usize> = (1..n).collect();
            let cols: Vec<usize> = (0..n).filter(|&c| c != j).collect();
            let minor = a.select_rows(&rows).select_columns(&cols);
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            sign * a.get(0, j) * cofactor_det(&minor)
        })
        .sum()
}

fn within(x: f64, target: f64, rel: f64) -> bool {
    (x - target).abs() <= rel * target.abs()
}

fn gaussian(rng: &mut impl Rng, n: usize, m: usize) -> DenseMatrix {
    DenseMatrix::from_fn(n, m, |_, _| rng.sample(StandardNormal))
}

#[test]
fn hadamard_matrices() {
    assert_eq!(
        adversarial::sylvester_hadamard(0).unwrap(),
        DenseMatrix::identity(1)
    );
    let h4 = adversarial::sylvester_hadamard(2).unwrap();
    let display = DenseMatrix::from_rows(&[
        [1.0, 1.0, 1.0, 1.0],
        [1.0, -1.0, 1.0, -1.0],
        [1.0, 1.0, -1.0, -1.0],
        [1.0, -1.0, -1.0, 1.0],
    ])
    .unwrap();
    assert_eq!(h4, display);
    assert_eq!(cofactor_det(&h4).abs(), 16.0);
    assert!((h4.determinant().unwrap() - cofactor_det(&h4)).abs() < 1e-9);

    let a = adversarial::hadamard_instance(2, 0.01, PNorm::TWO)
        .unwrap()
        .a;
    for j in 0..4 {
        assert_eq!(a.get(0, j), 0.01);
        for i in 1..4 {
            assert_eq!(a.get(i, j), display.get(i, j));
        }
    }
    let a0 = DenseMatrix::from_fn(4, 4, |i, j| if i == 0 { 0.0 } else { display.get(i, j) });
    assert_eq!(a0.numerical_rank(1e-8), 3);
}

#[test]
fn determinant_matches_cofactor_expansion() {
    let mut rng = verification::trial_rng(11, 0);
    for n in 1..=5 {
        let a = gaussian(&mut rng, n, n);
        let (x, y) = (a.determinant().unwrap(), cofactor_det(&a));
        assert!((x - y).abs() <= 1e-10 * (1.0 + y.abs()), "{x} vs {y}");
    }
}

#[test]
fn hadamard_leave_one_out_at_p2() {
    let eps = 1e-3;
    let inst = adversarial::hadamard_instance(2, eps, PNorm::TWO).unwrap();
    let reg = RegressionConfig::new(PNorm::TWO);
    let subset = ColumnSubset::proper(vec![0, 1, 2], 4).unwrap();
    let err = err_of_subset(&inst.a, &subset, &reg).unwrap();
    assert!(within(err, 4.0 * eps, 0.01), "{err}");
    assert!(within(
        err,
        4.0 * eps / (1.0 + 3.0 * eps * eps).sqrt(),
        1e-6
    ));

    let best = css::css_exact(&inst.a, 3, &reg).unwrap();
    assert!(within(best.error, 4.0 * eps, 0.01));
    assert!(within(best.error / (2.0 * eps), 2.0, 0.01));
}

#[test]
fn hadamard_ratio_at_p4() {
    let eps = 1e-4;
    let p = PNorm::Finite(4.0);
    let inst = adversarial::hadamard_instance(2, eps, p).unwrap();
    let reference = css::analytic(4f64.powf(0.25) * eps);
    let (_, rep) =
        css::css_ratio_report(&inst.a, 3, &RegressionConfig::new(p), reference, 1e-2).unwrap();
    let floor = 4f64.powf(0.75) / (1.0 + 3.0 * eps.powf(4.0 / 3.0)).powf(0.75);
    let ratio = rep.ratio().unwrap();
    assert!(ratio >= floor * (1.0 - 1e-3), "{ratio} vs {floor}");
    assert!((floor - 2.828).abs() < 1e-3);
}

#[test]
fn hadamard_ratio_with_eight_columns() {
    let eps = 1e-4;
    let p = PNorm::Finite(4.0);
    let inst = adversarial::hadamard_instance(3, eps, p).unwrap();
    let m = adversarial::measure_lower_bound(&inst, &RegressionConfig::new(p)).unwrap();
    let floor = 8f64.powf(0.75) / (1.0 + 7.0 * eps.powf(4.0 / 3.0)).powf(0.75);
    assert!((floor - 4.757).abs() < 1e-3);
    assert!(
        m.ratio >= floor * (1.0 - adversarial::LOWER_BOUND_SLACK),
        "{}",
        m.ratio
    );
    assert!(m.passed);
}

#[test]
fn lower_bound_closed_form_at_infinity() {
    let f = adversarial::lb_formula(3, 0.1, PNorm::Infinity);
    assert!((f - 4.0 / 1.3).abs() < 1e-12);
}

#[test]
fn css_against_the_oracle() {
    let p = PNorm::Finite(1.5);
    let reg = RegressionConfig::new(p);
    let a = gaussian(&mut verification::trial_rng(5, 1), 5, 6);
    let oracle = OracleConfig {
        restarts: 200,
        ..OracleConfig::default()
    };
    let opt = verification::opt_oracle(&a, 2, &oracle, &reg).unwrap();
    let res = css::css_exact(&a, 2, &reg).unwrap();
    assert!(
        res.error <= 3f64.powf(1.0 / 1.5) * opt,
        "{} vs {opt}",
        res.error
    );
    assert!(res.error >= opt * (1.0 - 1e-6));
}

#[test]
fn oracle_on_hadamard_at_p1() {
    let eps = 1e-3;
    let inst = adversarial::hadamard_instance(2, eps, PNorm::ONE).unwrap();
    let opt = verification::opt_oracle(
        &inst.a,
        3,
        &OracleConfig::default(),
        &RegressionConfig::new(PNorm::ONE),
    )
    .unwrap();
    assert!(opt <= 4.0 * eps * (1.0 + 1e-9), "{opt}");
}

#[test]
fn planted_css_passes_against_noise_norm() {
    for (i, p) in [PNorm::ONE, PNorm::TWO, PNorm::Finite(3.0), PNorm::Infinity]
        .into_iter()
        .enumerate()
    {
        let inst =
            adversarial::planted_instance(7, 8, 2, p, NoiseKind::Laplace, 0.05, i as u64).unwrap();
        let reference = lpla::report::Reference {
            kind: lpla::report::ReferenceKind::PlantedNoise,
            value: inst.noise_norm,
        };
        let (_, rep) =
            css::css_ratio_report(&inst.a, 2, &RegressionConfig::new(p), reference, 1e-2).unwrap();
        assert!(rep.passed, "{p}");
    }
}

#[test]
fn gaussian_noise_energy_is_near_nm_sigma_squared() {
    let (n, m, sigma) = (20, 30, 0.5);
    let mean: f64 = (0..20)
        .map(|s| {
            let inst =
                adversarial::planted_instance(n, m, 2, PNorm::TWO, NoiseKind::Gaussian, sigma, s)
                    .unwrap();
            inst.noise_norm.powi(2)
        })
        .sum::<f64>()
        / 20.0;
    assert!(within(mean, (n * m) as f64 * sigma * sigma, 0.1), "{mean}");
}

#[test]
fn lambda_is_a_laplace_expansion() {
    let mut rng = verification::trial_rng(3, 0);
    let s = gaussian(&mut rng, 2, 4);
    let r: Vec<f64> = (0..4).map(|_| rng.sample(StandardNormal)).collect();
    let pairs = [[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]];
    let b: Vec<f64> = pairs
        .iter()
        .map(|j| cofactor_det(&s.select_columns(j)))
        .collect();
    let out = verification::lambda_apply(&LambdaInstance::new(4, 2, r.clone(), b).unwrap());
    let t = DenseMatrix::from_fn(3, 4, |i, j| if i == 0 { r[j] } else { s.get(i - 1, j) });
    let triples = [[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]];
    for (x, idx) in out.iter().zip(&triples) {
        let d = cofactor_det(&t.select_columns(idx));
        assert!((x - d).abs() < 1e-12, "{x} vs {d}");
    }
}

#[test]
fn lambda_extreme_cases() {
    let mut rng = verification::trial_rng(4, 0);
    for _ in 0..200 {
        let a: Vec<f64> = (0..6).map(|_| rng.sample(StandardNormal)).collect();
        let b: Vec<f64> = (0..15).map(|_| rng.sample(StandardNormal)).collect();
        let inst = LambdaInstance::new(6, 2, a, b).unwrap();
        let c = verification::check_lambda_inequality(&inst, PNorm::ONE);
        assert!(c.holds);
        assert_eq!(
            c.rhs,
            lpla::matrix::lp_norm(&inst.a, PNorm::ONE) * lpla::matrix::lp_norm(&inst.b, PNorm::ONE)
        );
    }
    // p = inf, k = 3: every output is a signed sum of at most four ±1 terms.
    let m = 6;
    let nb = 20;
    for hot in 0..nb {
        let mut b = vec![0.0; nb];
        b[hot] = 1.0;
        let inst = LambdaInstance::new(m, 3, vec![1.0; m], b).unwrap();
        let out = verification::lambda_apply(&inst);
        let brute = out.iter().fold(0f64, |acc, v| acc.max(v.abs()));
        assert!(brute <= 4.0);
        assert!(verification::check_lambda_inequality(&inst, PNorm::Infinity).holds);
    }
}

#[test]
fn weighted_average_examples() {
    let inst = adversarial::hadamard_instance(2, 1e-3, PNorm::TWO).unwrap();
    let w = verification::check_weighted_average_bound(
        &inst.a,
        3,
        &RegressionConfig::new(PNorm::TWO),
        1e-2,
    )
    .unwrap();
    assert!(w.best_err_p <= w.bound * 1.01 && w.holds());
    let (_, _, tail) = linalg::best_rank_k(&inst.a, 3);
    assert!(within(w.bound, 4.0 * tail * tail, 1e-9));

    let a = gaussian(&mut verification::trial_rng(8, 0), 4, 5);
    let p = PNorm::Finite(3.0);
    let w =
        verification::check_weighted_average_bound(&a, 1, &RegressionConfig::new(p), 1e-2).unwrap();
    let (u, v, _) = linalg::best_rank_k(&a, 1);
    let delta = a.sub(&u.matmul(&v).unwrap()).unwrap().entrywise_norm(p);
    assert!(within(w.bound, 4.0 * delta.powi(3), 1e-9));
    assert!(w.holds());
}

#[test]
fn lemma1_on_a_random_instance() {
    let a = gaussian(&mut verification::trial_rng(9, 0), 4, 5);
    let (u, v, _) = linalg::best_rank_k(&a, 2);
    let subset = ColumnSubset::proper(vec![1, 3], 5).unwrap();
    for p in verification::TRIAL_PS {
        let c = verification::check_lemma1(&a, &u, &v, &subset, &RegressionConfig::new(p), 1e-9)
            .unwrap();
        assert!(c.holds, "{p}: {} > {}", c.lhs, c.rhs);
    }
}

#[test]
fn random_samples_cover_a_tenth_often_enough() {
    let (n, m, k, p) = (20, 40, 2, PNorm::TWO);
    let inst = adversarial::planted_instance(n, m, k, p, NoiseKind::Gaussian, 0.1, 77).unwrap();
    let cfg = CoverageConfig::new(p, k, inst.noise_norm);
    let reg = RegressionConfig::new(p);
    let threshold = 100.0 * 3.0 * inst.noise_norm.powi(2) / m as f64;
    let mut good = 0;
    for t in 0..500u64 {
        let mut rng = verification::trial_rng(77, t);
        let mut idx = index::sample(&mut rng, m, 2 * k).into_vec();
        idx.sort_unstable();
        let s = ColumnSubset::proper(idx.clone(), m).unwrap();
        let basis = inst.a.select_columns(&idx);
        let (pinv, _) = linalg::pseudo_inverse(&basis, 1e-12);
        let proj = basis.matmul(&pinv.matmul(&inst.a).unwrap()).unwrap();
        let resid = inst.a.sub(&proj).unwrap();
        let covered = (0..m)
            .filter(|&i| {
                let r2: f64 = resid.column(i).iter().map(|x| x * x).sum();
                r2 <= threshold
            })
            .count();
        if t < 20 {
            let direct = (0..m)
                .filter(|&i| {
                    bicriteria::is_approximately_covered(&inst.a, &s, i, &cfg, &reg).unwrap()
                })
                .count();
            assert_eq!(direct, covered);
        }
        good += usize::from(covered * 10 >= m);
    }
    assert!(good * 9 >= 500 * 2, "{good}/500");
}

#[test]
fn bicriteria_with_laplace_noise_at_p1() {
    let (n, m, k, p) = (30, 64, 2, PNorm::ONE);
    let c = RatioBound::new(p, k).c_pk;
    let reg = RegressionConfig::new(p);
    let mut good = 0;
    for s in 0..100u64 {
        let inst =
            adversarial::planted_instance(n, m, k, p, NoiseKind::Laplace, 0.1, 1000 + s).unwrap();
        let res =
            bicriteria::bicriteria_with_guessing(&inst.a, k, &reg, s, BicriteriaOptions::default())
                .unwrap();
        good += usize::from(res.error <= 10.0 * c * inst.noise_norm && res.selected.len() <= 28);
    }
    assert!(good >= 90, "{good}/100");
}

#[test]
fn isoperimetric_basis_of_a_badly_scaled_matrix() {
    let u = DenseMatrix::from_rows(&[[1.0, 0.0], [0.0, 1e6]]).unwrap();
    let iso = rank_reduction::make_isoperimetric(&u, PNorm::TWO).unwrap();
    assert!(iso.upper <= 1.0 + 1e-12 && iso.lower >= 0.25, "{iso:?}");
    let rescaled = DenseMatrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
    let (lo, hi) = rank_reduction::certificate(&rescaled, PNorm::TWO);
    assert!((lo - 1.0).abs() < 1e-12 && (hi - 1.0).abs() < 1e-12);
}

#[test]
fn pipeline_on_hadamard_tracks_css() {
    let inst = adversarial::hadamard_instance(2, 1e-2, PNorm::ONE).unwrap();
    let reg = RegressionConfig::new(PNorm::ONE);
    let exact = css::css_exact(&inst.a, 3, &reg).unwrap().error;
    let res =
        rank_reduction::full_pipeline(&inst.a, 3, &reg, 1, BicriteriaOptions::default()).unwrap();
    let c = RatioBound::new(PNorm::ONE, 3).c_pk;
    let slack = 50.0 * c.powi(3) * 3.0 * 2.0;
    assert!(
        res.factorization.error <= slack * exact,
        "{} vs {exact}",
        res.factorization.error
    );
    assert!(res.factorization.product().numerical_rank(1e-9) <= 3);
}
