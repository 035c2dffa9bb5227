//! From a rank-`t` factorization `U V` (with `t = O(k log m)`, typically
//! from the bi-criteria selector) to an exact rank-`k` one `W Z`.
//!
//! `span(U)` is re-expressed in a basis `W0` that is almost ℓp-isoperimetric,
//! `||x||_p / (2t) <= ||W0 x||_p <= ||x||_p`, so ℓp errors on coefficient
//! vectors and on the matrices they produce are comparable. The coefficients
//! `Z0` of `U V` in that basis are then compressed by exact column subset
//! selection on `Z0^T`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde_json::{json, Value};
use thiserror::Error;

use crate::bicriteria::{
    bicriteria_with_guessing, BicriteriaError, BicriteriaOptions, BicriteriaResult,
};
use crate::css::{css_exact_with, CssError, CssOptions};
use crate::linalg;
use crate::matrix::{lp_norm, DenseMatrix, MatrixError, PNorm, DEFAULT_RANK_TOL};
use crate::par::Exec;
use crate::regression::{solve_matrix_in, RegressionConfig, RegressionError};
use crate::report;

/// Random probes of each kind (signs, Gaussian directions) used by the
/// isoperimetry certificate.
pub const PROBES_PER_KIND: usize = 1000;
const PROBE_SEED: u64 = 0x5eed_1509;
const CERT_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RankReductionError {
    #[error("U has numerical rank {rank} but {cols} columns; drop dependent columns first")]
    RankDeficient { rank: usize, cols: usize },
    #[error("isoperimetry certificate failed: ratios in [{lower}, {upper}], need [{required}, 1]")]
    Certificate {
        lower: f64,
        upper: f64,
        required: f64,
    },
    #[error("rank {k} is invalid for factors of inner dimension {t} and {m} columns")]
    InvalidRank { k: usize, t: usize, m: usize },
    #[error(transparent)]
    Css(#[from] CssError),
    #[error(transparent)]
    Bicriteria(#[from] BicriteriaError),
    #[error(transparent)]
    Regression(#[from] RegressionError),
}

impl From<MatrixError> for RankReductionError {
    fn from(e: MatrixError) -> Self {
        RankReductionError::Regression(e.into())
    }
}

/// A basis with measured ℓp distortion.
#[derive(Debug, Clone, PartialEq)]
pub struct IsoperimetricBasis {
    pub basis: DenseMatrix,
    /// Smallest `||B x||_p / ||x||_p` over the probes.
    pub lower: f64,
    /// Largest `||B x||_p / ||x||_p` over the probes.
    pub upper: f64,
}

impl IsoperimetricBasis {
    pub fn required_lower(&self) -> f64 {
        1.0 / (2.0 * self.basis.cols() as f64)
    }
}

/// Builds `B = U R` for an invertible `R` with `||B x||_p <= ||x||_p` and,
/// on every probe, `||B x||_p >= ||x||_p / (2t)`.
///
/// Construction: orthonormalize, scale every column to unit ℓp norm, then
/// divide by the interpolation bound `||B||_1^(1/p) ||B||_inf^(1-1/p)` on the
/// ℓp operator norm (the largest singular value at `p = 2`), which makes the
/// upper inequality hold for all `x`. The lower one is certified on the
/// probes: the coordinate vectors and [`PROBES_PER_KIND`] seeded random sign
/// vectors and Gaussian directions.
pub fn make_isoperimetric(
    u: &DenseMatrix,
    p: PNorm,
) -> Result<IsoperimetricBasis, RankReductionError> {
    let t = u.cols();
    let rank = u.numerical_rank(DEFAULT_RANK_TOL);
    if rank < t {
        return Err(RankReductionError::RankDeficient { rank, cols: t });
    }
    let q = linalg::orthonormal_basis(u, DEFAULT_RANK_TOL).expect("full column rank");
    let cols: Vec<Vec<f64>> = q
        .columns()
        .into_iter()
        .map(|c| {
            let norm = lp_norm(&c, p);
            c.into_iter().map(|x| x / norm).collect()
        })
        .collect();
    let b = DenseMatrix::from_columns(&cols)?;
    let op = operator_bound(&b, p);
    let basis = b.scale(1.0 / op);
    let (lower, upper) = certificate(&basis, p);
    let iso = IsoperimetricBasis {
        basis,
        lower,
        upper,
    };
    if !(upper <= 1.0 + CERT_SLACK && lower >= iso.required_lower() - CERT_SLACK) {
        return Err(RankReductionError::Certificate {
            lower,
            upper,
            required: iso.required_lower(),
        });
    }
    Ok(iso)
}

/// An upper bound on `max ||B x||_p / ||x||_p`.
fn operator_bound(b: &DenseMatrix, p: PNorm) -> f64 {
    let (n, t) = b.shape();
    let col_sum = (0..t)
        .map(|j| (0..n).map(|i| b.get(i, j).abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let row_sum = (0..n)
        .map(|i| b.row(i).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    match p {
        PNorm::Infinity => row_sum,
        PNorm::Finite(2.0) => b.singular_values()[0],
        PNorm::Finite(e) => col_sum.powf(1.0 / e) * row_sum.powf(1.0 - 1.0 / e),
    }
}

/// Smallest and largest probe ratio `||B x||_p / ||x||_p`.
pub fn certificate(b: &DenseMatrix, p: PNorm) -> (f64, f64) {
    let t = b.cols();
    let mut rng = ChaCha8Rng::seed_from_u64(PROBE_SEED);
    let mut probes: Vec<Vec<f64>> = (0..t)
        .map(|j| {
            let mut e = vec![0.0; t];
            e[j] = 1.0;
            e
        })
        .collect();
    for _ in 0..PROBES_PER_KIND {
        probes.push(
            (0..t)
                .map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 })
                .collect(),
        );
    }
    for _ in 0..PROBES_PER_KIND {
        let g: Vec<f64> = (0..t).map(|_| rng.sample(StandardNormal)).collect();
        let norm = lp_norm(&g, PNorm::TWO);
        probes.push(g.into_iter().map(|x| x / norm).collect());
    }
    probes
        .iter()
        .filter(|x| x.iter().any(|&v| v != 0.0))
        .map(|x| {
            let bx = b.mul_vec(x).expect("probe length matches");
            lp_norm(&bx, p) / lp_norm(x, p)
        })
        .fold((f64::INFINITY, 0.0_f64), |(lo, hi), r| {
            (lo.min(r), hi.max(r))
        })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankKFactorization {
    pub w: DenseMatrix,
    pub z: DenseMatrix,
    /// `||A - W Z||_p`.
    pub error: f64,
}

impl RankKFactorization {
    pub fn product(&self) -> DenseMatrix {
        self.w.matmul(&self.z).expect("inner dimensions agree")
    }
}

/// Intermediate quantities of one rank reduction.
#[derive(Debug, Clone, PartialEq)]
pub struct ReductionTrace {
    /// Numerical rank of `U`, the width of `W0`.
    pub basis_rank: usize,
    pub certificate: Option<(f64, f64)>,
    /// `||W0 Z0 - U V||_p`.
    pub coefficient_fit_error: f64,
    /// Rows of `Z0` kept by the subset selection.
    pub kept_rows: Vec<usize>,
}

/// Reduces `U V` (inner dimension `t`) to rank `k`. When `U` has rank
/// below `k`, the missing directions are padded with zeros.
pub fn reduce_rank(
    a: &DenseMatrix,
    u: &DenseMatrix,
    v: &DenseMatrix,
    k: usize,
    reg: &RegressionConfig,
) -> Result<(RankKFactorization, ReductionTrace), RankReductionError> {
    reduce_rank_in(a, u, v, k, reg, Exec::default())
}

pub fn reduce_rank_in(
    a: &DenseMatrix,
    u: &DenseMatrix,
    v: &DenseMatrix,
    k: usize,
    reg: &RegressionConfig,
    exec: Exec,
) -> Result<(RankKFactorization, ReductionTrace), RankReductionError> {
    let uv = u.matmul(v)?;
    if uv.shape() != a.shape() {
        return Err(MatrixError::ShapeMismatch {
            op: "reduce_rank",
            left: a.shape(),
            right: uv.shape(),
        }
        .into());
    }
    let (n, m) = a.shape();
    if k == 0 || k > u.cols() || k > m {
        return Err(RankReductionError::InvalidRank { k, t: u.cols(), m });
    }
    let Some(q) = linalg::orthonormal_basis(u, DEFAULT_RANK_TOL) else {
        let fac = finish(a, DenseMatrix::zeros(n, k), DenseMatrix::zeros(k, m), reg.p);
        let trace = ReductionTrace {
            basis_rank: 0,
            certificate: None,
            coefficient_fit_error: uv.entrywise_norm(reg.p),
            kept_rows: Vec::new(),
        };
        return Ok((fac, trace));
    };
    let iso = make_isoperimetric(&q, reg.p)?;
    let w0 = iso.basis;
    let t = w0.cols();
    let z0 = solve_matrix_in(&w0, &uv, reg, exec)?;
    let keep = k.min(t);
    let css = css_exact_with(
        &z0.coefficients.transpose(),
        keep,
        reg,
        CssOptions {
            exec,
            ..CssOptions::default()
        },
    )?;
    // Z0^T ~ X Y with X = (Z0^T)_J (m x keep) and Y (keep x t).
    let x = css.factorization.left;
    let y = css.factorization.right;
    let w_kept = w0.matmul(&y.transpose())?;
    let w = DenseMatrix::from_fn(n, k, |i, j| if j < keep { w_kept.get(i, j) } else { 0.0 });
    let z = DenseMatrix::from_fn(k, m, |i, j| if i < keep { x.get(j, i) } else { 0.0 });
    let trace = ReductionTrace {
        basis_rank: t,
        certificate: Some((iso.lower, iso.upper)),
        coefficient_fit_error: z0.objective,
        kept_rows: css.best_subset.indices().to_vec(),
    };
    Ok((finish(a, w, z, reg.p), trace))
}

fn finish(a: &DenseMatrix, w: DenseMatrix, z: DenseMatrix, p: PNorm) -> RankKFactorization {
    let resid = a
        .sub(&w.matmul(&z).expect("inner dimensions agree"))
        .expect("same shape");
    RankKFactorization {
        error: resid.entrywise_norm(p),
        w,
        z,
    }
}

/// The bi-criteria selection followed by rank reduction, with the
/// intermediate results.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineResult {
    pub factorization: RankKFactorization,
    pub bicriteria: BicriteriaResult,
    pub trace: ReductionTrace,
}

impl PipelineResult {
    pub fn provenance_json(&self) -> Value {
        json!({
            "bicriteria_columns": self.bicriteria.selected.indices(),
            "bicriteria_error": report::float(self.bicriteria.error),
            "guesses": self.bicriteria.guesses_tried.iter().map(|g| g.to_json()).collect::<Vec<_>>(),
            "basis_rank": self.trace.basis_rank,
            "certificate": self.trace.certificate.map(|(lo, hi)| json!([report::float(lo), report::float(hi)])),
            "coefficient_fit_error": report::float(self.trace.coefficient_fit_error),
            "kept_rows": self.trace.kept_rows,
            "final_error": report::float(self.factorization.error),
        })
    }
}

pub fn full_pipeline(
    a: &DenseMatrix,
    k: usize,
    reg: &RegressionConfig,
    seed: u64,
    opts: BicriteriaOptions,
) -> Result<PipelineResult, RankReductionError> {
    let bic = bicriteria_with_guessing(a, k, reg, seed, opts)?;
    let u = a.submatrix_columns(&bic.selected)?;
    let (factorization, trace) = reduce_rank_in(a, &u, &bic.coefficients, k, reg, opts.exec)?;
    Ok(PipelineResult {
        factorization,
        bicriteria: bic,
        trace,
    })
}

/// `||A - U V'||_p` for a fresh regression `V'` of `A` onto all of `U`.
pub fn refit_error(
    a: &DenseMatrix,
    u: &DenseMatrix,
    reg: &RegressionConfig,
) -> Result<f64, RankReductionError> {
    Ok(solve_matrix_in(u, a, reg, Exec::default())?.objective)
}
