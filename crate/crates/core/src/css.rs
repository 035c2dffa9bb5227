//! Exact column subset selection: evaluate `Err(A_J)` for every `k`-subset
//! `J` and keep the best. The returned factorization `A_J Y` is within a
//! factor `c_{p,k}` of the best rank-`k` approximation in entry-wise ℓp.

use thiserror::Error;

use crate::combinatorics::{binomial, next_combination, unrank_combination};
use crate::matrix::{ColumnSubset, DenseMatrix, MatrixError, PNorm};
use crate::par::Exec;
use crate::regression::{fit_subset, RegressionConfig, RegressionError};
use crate::report::{ApproxReport, Reference, ReferenceKind};

/// Largest number of subsets enumerated unless the caller raises it.
pub const DEFAULT_BUDGET: u64 = 1_000_000;

/// Subsets handed to one worker at a time.
const CHUNK: u64 = 32;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CssError {
    #[error("rank {k} must satisfy 1 <= k <= min(n, m) = {limit}")]
    InvalidRank { k: usize, limit: usize },
    #[error(
        "{subsets} subsets exceed the enumeration budget of {budget}; \
         use the bi-criteria selector for inputs this large"
    )]
    BudgetExceeded { subsets: u64, budget: u64 },
    #[error(transparent)]
    Regression(#[from] RegressionError),
}

impl From<MatrixError> for CssError {
    fn from(e: MatrixError) -> Self {
        CssError::Regression(e.into())
    }
}

/// The approximation constants for a given `(p, k)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioBound {
    pub p: PNorm,
    pub k: usize,
    /// `(k+1)^(1/p)` for `p <= 2`, `(k+1)^(1-1/p)` for `p >= 2`.
    pub c_pk: f64,
}

impl RatioBound {
    pub fn new(p: PNorm, k: usize) -> Self {
        let kp1 = (k + 1) as f64;
        let c_pk = match p {
            PNorm::Infinity => kp1,
            PNorm::Finite(e) if e <= 2.0 => kp1.powf(1.0 / e),
            PNorm::Finite(e) => kp1.powf(1.0 - 1.0 / e),
        };
        Self { p, k, c_pk }
    }

    /// `C_{p,k} = c_{p,k}^p`; `None` at `p = inf`.
    pub fn c_pow(&self) -> Option<f64> {
        let kp1 = (self.k + 1) as f64;
        match self.p {
            PNorm::Infinity => None,
            PNorm::Finite(e) if e <= 2.0 => Some(kp1),
            PNorm::Finite(e) => Some(kp1.powf(e - 1.0)),
        }
    }
}

/// A left factor, a right factor and the ℓp residual they achieve.
#[derive(Debug, Clone, PartialEq)]
pub struct Factorization {
    pub left: DenseMatrix,
    pub right: DenseMatrix,
    pub error: f64,
}

impl Factorization {
    pub fn rank_bound(&self) -> usize {
        self.left.cols()
    }

    pub fn product(&self) -> DenseMatrix {
        self.left
            .matmul(&self.right)
            .expect("factor shapes agree by construction")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CssResult {
    pub best_subset: ColumnSubset,
    pub factorization: Factorization,
    pub error: f64,
    pub subsets_evaluated: u64,
    /// Every regression of the winning subset converged.
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CssOptions {
    pub budget: u64,
    pub exec: Exec,
}

impl Default for CssOptions {
    fn default() -> Self {
        Self {
            budget: DEFAULT_BUDGET,
            exec: Exec::default(),
        }
    }
}

pub fn css_exact(a: &DenseMatrix, k: usize, cfg: &RegressionConfig) -> Result<CssResult, CssError> {
    css_exact_with(a, k, cfg, CssOptions::default())
}

/// Evaluates all `k`-subsets in lexicographic order. Ties in error go to
/// the lexicographically smallest subset, whatever the schedule.
pub fn css_exact_with(
    a: &DenseMatrix,
    k: usize,
    cfg: &RegressionConfig,
    opts: CssOptions,
) -> Result<CssResult, CssError> {
    cfg.validate()?;
    let (n, m) = a.shape();
    if k == 0 || k > n.min(m) {
        return Err(CssError::InvalidRank { k, limit: n.min(m) });
    }
    let total = binomial(m, k);
    if total > opts.budget {
        return Err(CssError::BudgetExceeded {
            subsets: total,
            budget: opts.budget,
        });
    }
    let chunks = total.div_ceil(CHUNK);
    let partial = opts.exec.map_range(chunks as usize, |c| {
        let start = c as u64 * CHUNK;
        let end = (start + CHUNK).min(total);
        let mut comb = unrank_combination(start, m, k);
        let mut best: Option<(f64, Vec<usize>)> = None;
        for _ in start..end {
            let subset = ColumnSubset::proper(comb.clone(), m)?;
            let err = fit_subset(a, &subset, cfg, Exec::Sequential)?.objective;
            // Strict comparison keeps the earliest subset on ties.
            if best.as_ref().is_none_or(|(e, _)| err < *e) {
                best = Some((err, comb.clone()));
            }
            next_combination(&mut comb, m);
        }
        Ok::<_, CssError>(best)
    });
    let mut best: Option<(f64, Vec<usize>)> = None;
    for chunk in partial {
        if let Some((err, comb)) = chunk? {
            if best.as_ref().is_none_or(|(e, _)| err < *e) {
                best = Some((err, comb));
            }
        }
    }
    let (_, comb) = best.expect("at least one subset");
    let subset = ColumnSubset::proper(comb, m)?;
    let fit = fit_subset(a, &subset, cfg, opts.exec)?;
    let left = a.submatrix_columns(&subset)?;
    Ok(CssResult {
        best_subset: subset,
        error: fit.objective,
        converged: fit.converged,
        factorization: Factorization {
            left,
            right: fit.coefficients,
            error: fit.objective,
        },
        subsets_evaluated: total,
    })
}

/// Packages a CSS run against a caller-supplied OPT reference. The run
/// passes when `error <= c_{p,k} * reference * (1 + tol)`.
pub fn css_ratio_report(
    a: &DenseMatrix,
    k: usize,
    cfg: &RegressionConfig,
    reference: Reference,
    tol: f64,
) -> Result<(CssResult, ApproxReport), CssError> {
    let res = css_exact(a, k, cfg)?;
    let bound = RatioBound::new(cfg.p, k);
    let mut report = ApproxReport::new("css", a.shape(), cfg.p);
    report.k = Some(k);
    report.error = res.error;
    report.reference = Some(reference);
    report.bound = bound.c_pk;
    report.passed = res.error <= bound.c_pk * reference.value * (1.0 + tol);
    report
        .detail("subset", serde_json::json!(res.best_subset.indices()))
        .detail(
            "subsets_evaluated",
            serde_json::json!(res.subsets_evaluated),
        )
        .detail("converged", serde_json::json!(res.converged));
    Ok((res, report))
}

/// Shorthand for an analytic reference.
pub fn analytic(value: f64) -> Reference {
    Reference {
        kind: ReferenceKind::Analytic,
        value,
    }
}
