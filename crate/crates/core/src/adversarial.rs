//! Test instances: the perturbed Hadamard family on which column subset
//! selection cannot beat a factor `(k+1)^(1-1/p)`, and planted low-rank plus
//! noise matrices whose noise norm bounds OPT from above.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde_json::json;
use thiserror::Error;

use crate::css::RatioBound;
use crate::matrix::{ColumnSubset, DenseMatrix, PNorm};
use crate::par::Exec;
use crate::regression::{fit_subset, RegressionConfig, RegressionError};
use crate::report::{self, ApproxReport, Reference, ReferenceKind};

/// Largest supported Sylvester order exponent (`2^6 = 64`).
pub const MAX_HADAMARD_R: u32 = 6;

/// Slack on the measured lower-bound ratio, absorbing solver tolerance.
pub const LOWER_BOUND_SLACK: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AdversarialError {
    #[error("Hadamard order 2^{0} is above the supported maximum 2^{MAX_HADAMARD_R}")]
    OrderTooLarge(u32),
    #[error("eps must lie in (0, 1), got {0}")]
    EpsOutOfRange(f64),
    #[error("invalid planted instance: {0}")]
    InvalidPlanted(String),
    #[error(transparent)]
    Regression(#[from] RegressionError),
}

/// `H^(2^r)` by the Sylvester doubling `[[H, H], [H, -H]]`.
pub fn sylvester_hadamard(r: u32) -> Result<DenseMatrix, AdversarialError> {
    if r > MAX_HADAMARD_R {
        return Err(AdversarialError::OrderTooLarge(r));
    }
    let n = 1usize << r;
    // Entry (i, j) is (-1)^popcount(i & j).
    Ok(DenseMatrix::from_fn(n, n, |i, j| {
        if (i & j).count_ones() % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }))
}

/// `A(eps)`: a Sylvester Hadamard matrix with its first row replaced by
/// `eps`, plus the analytic quantities for a given `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct HadamardInstance {
    pub r: u32,
    pub k: usize,
    pub eps: f64,
    pub p: PNorm,
    pub a: DenseMatrix,
    /// `||A(eps) - A(0)||_p = (k+1)^(1/p) eps`, an upper bound on OPT.
    pub opt_upper: f64,
    /// `(k+1)^(1-1/p) / (1 + k eps^q)^(1/q)`, the ratio no column subset
    /// can beat.
    pub lb_formula: f64,
}

pub fn hadamard_instance(r: u32, eps: f64, p: PNorm) -> Result<HadamardInstance, AdversarialError> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(AdversarialError::EpsOutOfRange(eps));
    }
    let h = sylvester_hadamard(r)?;
    let n = h.rows();
    let k = n - 1;
    let a = DenseMatrix::from_fn(n, n, |i, j| if i == 0 { eps } else { h.get(i, j) });
    let kp1 = n as f64;
    let opt_upper = match p {
        PNorm::Infinity => eps,
        PNorm::Finite(e) => kp1.powf(1.0 / e) * eps,
    };
    Ok(HadamardInstance {
        r,
        k,
        eps,
        p,
        a,
        opt_upper,
        lb_formula: lb_formula(k, eps, p),
    })
}

/// `(k+1)^(1-1/p) / (1 + k eps^q)^(1/q)` with `1/p + 1/q = 1`.
pub fn lb_formula(k: usize, eps: f64, p: PNorm) -> f64 {
    let kp1 = (k + 1) as f64;
    match p {
        // q = inf: the denominator tends to max(1, eps) = 1.
        PNorm::Finite(1.0) => 1.0,
        PNorm::Infinity => kp1 / (1.0 + k as f64 * eps),
        PNorm::Finite(e) => {
            let q = e / (e - 1.0);
            kp1.powf(1.0 - 1.0 / e) / (1.0 + k as f64 * eps.powf(q)).powf(1.0 / q)
        }
    }
}

/// Leave-one-out errors on a Hadamard instance.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerBoundMeasurement {
    /// `Err(A_{[k+1] - {j}})` for each `j`.
    pub per_column: Vec<f64>,
    pub min_error: f64,
    pub ratio: f64,
    pub lb_formula: f64,
    pub opt_upper: f64,
    pub passed: bool,
    /// Largest deviation of the leave-one-out coefficients from `-1`,
    /// over all `j`.
    pub coefficient_deviation: f64,
}

impl LowerBoundMeasurement {
    pub fn to_report(&self, inst: &HadamardInstance) -> ApproxReport {
        let mut rep = ApproxReport::new("lowerbound", inst.a.shape(), inst.p);
        rep.k = Some(inst.k);
        rep.error = self.min_error;
        rep.reference = Some(Reference {
            kind: ReferenceKind::Analytic,
            value: self.opt_upper,
        });
        rep.bound = RatioBound::new(inst.p, inst.k).c_pk;
        rep.passed = self.passed;
        rep.detail("r", json!(inst.r))
            .detail("eps", report::float(inst.eps))
            .detail("lb_formula", report::float(self.lb_formula))
            .detail(
                "per_column",
                json!(self
                    .per_column
                    .iter()
                    .map(|&e| report::float(e))
                    .collect::<Vec<_>>()),
            )
            .detail(
                "coefficient_deviation",
                report::float(self.coefficient_deviation),
            );
        rep
    }
}

/// Computes every leave-one-out error; the run passes when the smallest
/// one, divided by `opt_upper`, reaches `lb_formula` up to
/// [`LOWER_BOUND_SLACK`].
pub fn measure_lower_bound(
    inst: &HadamardInstance,
    reg: &RegressionConfig,
) -> Result<LowerBoundMeasurement, AdversarialError> {
    let mut cfg = *reg;
    cfg.p = inst.p;
    let n = inst.k + 1;
    let fits = Exec::default().map_range(n, |j| {
        let keep: Vec<usize> = (0..n).filter(|&i| i != j).collect();
        let subset = ColumnSubset::proper(keep, n).expect("indices in range");
        fit_subset(&inst.a, &subset, &cfg, Exec::Sequential)
    });
    let mut per_column = Vec::with_capacity(n);
    let mut deviation = 0.0_f64;
    for (j, fit) in fits.into_iter().enumerate() {
        let fit = fit?;
        per_column.push(fit.objective);
        for c in fit.coefficients.column(j) {
            deviation = deviation.max((c + 1.0).abs());
        }
    }
    let min_error = per_column.iter().copied().fold(f64::INFINITY, f64::min);
    let ratio = min_error / inst.opt_upper;
    Ok(LowerBoundMeasurement {
        per_column,
        min_error,
        ratio,
        lb_formula: inst.lb_formula,
        opt_upper: inst.opt_upper,
        passed: ratio >= inst.lb_formula * (1.0 - LOWER_BOUND_SLACK),
        coefficient_deviation: deviation,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseKind {
    Gaussian,
    Laplace,
    /// `round(density * n * m)` entries at uniformly chosen positions, each
    /// `scale * N(0, 1)`; the rest zero.
    SparseSpikes {
        density: f64,
    },
}

/// `A = L + E` with `L = G1 G2` of rank at most `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedInstance {
    pub a: DenseMatrix,
    pub l: DenseMatrix,
    pub e: DenseMatrix,
    pub k: usize,
    /// `||E||_p`, an upper bound on OPT.
    pub noise_norm: f64,
}

/// Generates a planted instance. `G1` (`n x k`), `G2` (`k x m`) and the
/// noise are drawn in that order from one ChaCha8 stream seeded by `seed`.
pub fn planted_instance(
    n: usize,
    m: usize,
    k: usize,
    p: PNorm,
    noise: NoiseKind,
    scale: f64,
    seed: u64,
) -> Result<PlantedInstance, AdversarialError> {
    if n == 0 || m == 0 || k == 0 || k > n.min(m) {
        return Err(AdversarialError::InvalidPlanted(format!(
            "need 1 <= k <= min(n, m), got n = {n}, m = {m}, k = {k}"
        )));
    }
    if !(scale >= 0.0 && scale.is_finite()) {
        return Err(AdversarialError::InvalidPlanted(format!("scale {scale}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g1 = DenseMatrix::from_fn(n, k, |_, _| rng.sample(StandardNormal));
    let g2 = DenseMatrix::from_fn(k, m, |_, _| rng.sample(StandardNormal));
    let l = g1.matmul(&g2).expect("inner dimensions agree");
    let e = match noise {
        NoiseKind::Gaussian => {
            DenseMatrix::from_fn(n, m, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
        }
        NoiseKind::Laplace => DenseMatrix::from_fn(n, m, |_, _| scale * laplace(&mut rng)),
        NoiseKind::SparseSpikes { density } => {
            if !(0.0..=1.0).contains(&density) {
                return Err(AdversarialError::InvalidPlanted(format!(
                    "density {density}"
                )));
            }
            let count = (density * (n * m) as f64).round() as usize;
            let mut data = vec![0.0; n * m];
            let mut positions = index::sample(&mut rng, n * m, count).into_vec();
            positions.sort_unstable();
            for pos in positions {
                data[pos] = scale * rng.sample::<f64, _>(StandardNormal);
            }
            DenseMatrix::new(n, m, data).expect("finite noise")
        }
    };
    let a = l.add(&e).expect("same shape");
    let noise_norm = e.entrywise_norm(p);
    Ok(PlantedInstance {
        a,
        l,
        e,
        k,
        noise_norm,
    })
}

/// Standard Laplace sample by inverting its CDF.
fn laplace(rng: &mut impl Rng) -> f64 {
    let u: f64 = rng.random::<f64>() - 0.5;
    // u = -0.5 exactly would give ln(0); the draw is in [0, 1) so only
    // that endpoint needs care.
    let mag = (1.0 - 2.0 * u.abs()).max(f64::MIN_POSITIVE);
    -u.signum() * mag.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_hadamards() {
        assert_eq!(sylvester_hadamard(0).unwrap().as_slice(), &[1.0]);
        assert_eq!(
            sylvester_hadamard(1).unwrap().as_slice(),
            &[1.0, 1.0, 1.0, -1.0]
        );
        let h4 = sylvester_hadamard(2).unwrap();
        let expect = DenseMatrix::from_rows(&[
            [1.0, 1.0, 1.0, 1.0],
            [1.0, -1.0, 1.0, -1.0],
            [1.0, 1.0, -1.0, -1.0],
            [1.0, -1.0, -1.0, 1.0],
        ])
        .unwrap();
        assert_eq!(h4, expect);
        assert!(sylvester_hadamard(7).is_err());
    }

    #[test]
    fn orthogonal_columns() {
        for r in 0..=MAX_HADAMARD_R {
            let h = sylvester_hadamard(r).unwrap();
            let gram = h.transpose().matmul(&h).unwrap();
            let n = h.rows() as f64;
            assert_eq!(gram, DenseMatrix::identity(h.rows()).scale(n));
        }
    }

    #[test]
    fn instance_shape_and_formula() {
        let inst = hadamard_instance(2, 0.01, PNorm::TWO).unwrap();
        assert_eq!(inst.k, 3);
        assert_eq!(inst.a.row(0), &[0.01; 4]);
        assert_eq!(inst.a.row(1), &[1.0, -1.0, 1.0, -1.0]);
        assert!((inst.opt_upper - 0.02).abs() < 1e-15);
        assert!((lb_formula(3, 0.1, PNorm::Infinity) - 4.0 / 1.3).abs() < 1e-12);
        assert!((lb_formula(3, 1e-12, PNorm::TWO) - 2.0).abs() < 1e-9);
        assert_eq!(lb_formula(3, 1e-3, PNorm::ONE), 1.0);
        assert!(hadamard_instance(2, 1.0, PNorm::TWO).is_err());
    }

    #[test]
    fn leave_one_out_coefficients_are_minus_one() {
        let inst = hadamard_instance(2, 1e-3, PNorm::TWO).unwrap();
        let m = measure_lower_bound(&inst, &RegressionConfig::new(PNorm::TWO)).unwrap();
        assert!(m.passed);
        assert!(m.coefficient_deviation <= 10.0 * inst.eps);
        assert!((m.ratio - 2.0).abs() < 0.02);
    }

    #[test]
    fn planted_noise_shapes() {
        let zero = planted_instance(5, 7, 2, PNorm::TWO, NoiseKind::Gaussian, 0.0, 3).unwrap();
        assert_eq!(zero.a, zero.l);
        assert!(zero.a.numerical_rank(1e-10) <= 2);
        let sparse = planted_instance(
            10,
            12,
            2,
            PNorm::ONE,
            NoiseKind::SparseSpikes { density: 0.1 },
            1.0,
            9,
        )
        .unwrap();
        let nnz = sparse.e.as_slice().iter().filter(|&&x| x != 0.0).count();
        assert_eq!(nnz, 12);
        let again = planted_instance(
            10,
            12,
            2,
            PNorm::ONE,
            NoiseKind::SparseSpikes { density: 0.1 },
            1.0,
            9,
        )
        .unwrap();
        assert_eq!(sparse, again);
    }

    #[test]
    fn laplace_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xs: Vec<f64> = (0..200_000).map(|_| laplace(&mut rng)).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let mean_abs = xs.iter().map(|x| x.abs()).sum::<f64>() / xs.len() as f64;
        assert!(mean.abs() < 0.02);
        // E|X| = 1 for the standard Laplace law.
        assert!((mean_abs - 1.0).abs() < 0.02);
    }
}
