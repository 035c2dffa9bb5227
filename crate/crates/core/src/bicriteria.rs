//! Randomized bi-criteria column selection: returns `O(k log m)` columns
//! whose span approximates `A` within `O(c_{p,k})` of the best rank-`k`
//! error, in polynomial time.
//!
//! Each level samples `2k` columns until at least a tenth of the current
//! columns are approximately covered by them, keeps the sample, and recurses
//! on the uncovered columns. The coverage threshold needs a guess `N` of the
//! optimal residual norm; guesses walk a doubling ladder anchored at the ℓ2
//! residual, which is computable from singular values.

use rand::seq::index;
use rand::Rng;
use serde_json::{json, Value};
use thiserror::Error;

use crate::css::RatioBound;
use crate::linalg;
use crate::matrix::{ColumnSubset, DenseMatrix, MatrixError, PNorm};
use crate::par::Exec;
use crate::regression::{fit_subset, LpSolver, RegressionConfig, RegressionError};
use crate::report;
use crate::verification::trial_rng;

pub const DEFAULT_MAX_ROUNDS: usize = 200;
pub const COVERAGE_FRACTION: f64 = 0.1;

/// Guess used when the input has (numerically) rank at most `k`, relative
/// to `||A||_2`.
const EXACT_RANK_GUESS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BicriteriaError {
    #[error("rank {k} must satisfy 1 <= k <= min(n, m) = {limit}")]
    InvalidRank { k: usize, limit: usize },
    #[error("invalid coverage config: {0}")]
    InvalidConfig(String),
    #[error("no sample covered a tenth of the columns at level {level} within {rounds} rounds")]
    RoundsExhausted { level: usize, rounds: usize },
    #[error("every guess of the residual norm failed ({} tried)", .0.len())]
    AllGuessesFailed(Vec<GuessRecord>),
    #[error(transparent)]
    Regression(#[from] RegressionError),
}

impl From<MatrixError> for BicriteriaError {
    fn from(e: MatrixError) -> Self {
        BicriteriaError::Regression(e.into())
    }
}

/// Parameters of the approximate-coverage test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageConfig {
    pub p: PNorm,
    pub k: usize,
    /// Guess of the optimal residual norm of the original matrix; kept
    /// fixed through the recursion.
    pub n_guess: f64,
    pub lambda: f64,
    pub coverage_fraction: f64,
    pub sample_size: usize,
    pub max_rounds_per_level: usize,
}

impl CoverageConfig {
    pub fn new(p: PNorm, k: usize, n_guess: f64) -> Self {
        Self {
            p,
            k,
            n_guess,
            lambda: 1.0,
            coverage_fraction: COVERAGE_FRACTION,
            sample_size: 2 * k,
            max_rounds_per_level: DEFAULT_MAX_ROUNDS,
        }
    }

    pub fn validate(&self) -> Result<(), BicriteriaError> {
        let bad = |msg: String| Err(BicriteriaError::InvalidConfig(msg));
        if self.k == 0 {
            return bad("k must be positive".into());
        }
        if !(self.n_guess > 0.0 && self.n_guess.is_finite()) {
            return bad(format!("guess N = {} must be positive", self.n_guess));
        }
        if !(self.lambda >= 1.0 && self.lambda.is_finite()) {
            return bad(format!("lambda = {} must be >= 1", self.lambda));
        }
        if self.sample_size != 2 * self.k {
            return bad(format!(
                "sample size {} must equal 2k = {}",
                self.sample_size,
                2 * self.k
            ));
        }
        if self.max_rounds_per_level == 0 {
            return bad("max_rounds_per_level must be >= 1".into());
        }
        Ok(())
    }

    /// A column whose regression residual `r` against the sample satisfies
    /// `r^p <= lambda * 100 * C_{p,k} * N^p / m_cur` (for finite `p`) or
    /// `r <= lambda * (k+1) * N` (for `p = inf`) is covered.
    pub fn covers(&self, residual: f64, m_cur: usize) -> bool {
        match RatioBound::new(self.p, self.k).c_pow() {
            Some(c_pow) => {
                self.p.pow(residual)
                    <= self.lambda * 100.0 * c_pow * self.p.pow(self.n_guess) / m_cur as f64
            }
            None => residual <= self.lambda * (self.k + 1) as f64 * self.n_guess,
        }
    }
}

/// Whether column `i` of `A` is approximately covered by the columns `S`.
/// A regression that did not converge counts as not covered.
pub fn is_approximately_covered(
    a: &DenseMatrix,
    s: &ColumnSubset,
    i: usize,
    cfg: &CoverageConfig,
    reg: &RegressionConfig,
) -> Result<bool, BicriteriaError> {
    if i >= a.cols() {
        return Err(MatrixError::IndexOutOfRange {
            index: i,
            cols: a.cols(),
        }
        .into());
    }
    let basis = a.submatrix_columns(s)?;
    let mut reg = *reg;
    reg.p = cfg.p;
    let sol = LpSolver::new(&basis, reg)?.solve(&a.column(i))?;
    Ok(sol.converged && cfg.covers(sol.objective, a.cols()))
}

/// Columns chosen by one run of the recursive sampler.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub selected: ColumnSubset,
    pub levels: usize,
    /// Sampling rounds spent over all levels.
    pub rounds: usize,
}

/// Runs the recursive sampler with the generator seeded by `seed`.
pub fn select_columns(
    a: &DenseMatrix,
    cfg: &CoverageConfig,
    reg: &RegressionConfig,
    seed: u64,
) -> Result<Selection, BicriteriaError> {
    select_with(a, cfg, reg, &mut trial_rng(seed, 0), Exec::default())
}

fn select_with(
    a: &DenseMatrix,
    cfg: &CoverageConfig,
    reg: &RegressionConfig,
    rng: &mut impl Rng,
    exec: Exec,
) -> Result<Selection, BicriteriaError> {
    cfg.validate()?;
    let mut reg = *reg;
    reg.p = cfg.p;
    let m = a.cols();
    let mut remaining: Vec<usize> = (0..m).collect();
    let mut selected = Vec::new();
    let mut levels = 0;
    let mut rounds = 0;
    while remaining.len() > cfg.sample_size {
        levels += 1;
        let m_cur = remaining.len();
        let need = (cfg.coverage_fraction * m_cur as f64).ceil() as usize;
        let mut accepted = None;
        for _ in 0..cfg.max_rounds_per_level {
            rounds += 1;
            let mut pick = index::sample(rng, m_cur, cfg.sample_size).into_vec();
            pick.sort_unstable();
            let sample: Vec<usize> = pick.iter().map(|&t| remaining[t]).collect();
            let basis = a.select_columns(&sample);
            let solver = LpSolver::new(&basis, reg)?;
            let covered = exec.map(&remaining, |&col| {
                if sample.contains(&col) {
                    return Ok(true);
                }
                let sol = solver.solve(&a.column(col))?;
                Ok::<_, RegressionError>(sol.converged && cfg.covers(sol.objective, m_cur))
            });
            let covered = covered.into_iter().collect::<Result<Vec<_>, _>>()?;
            if covered.iter().filter(|&&c| c).count() >= need {
                accepted = Some((sample, covered));
                break;
            }
        }
        let Some((sample, covered)) = accepted else {
            return Err(BicriteriaError::RoundsExhausted {
                level: levels,
                rounds: cfg.max_rounds_per_level,
            });
        };
        selected.extend(sample);
        remaining = remaining
            .iter()
            .zip(&covered)
            .filter(|(_, &c)| !c)
            .map(|(&col, _)| col)
            .collect();
    }
    selected.extend(remaining);
    selected.sort_unstable();
    Ok(Selection {
        selected: ColumnSubset::proper(selected, m)?,
        levels,
        rounds,
    })
}

/// Outcome of one guess on the ladder.
#[derive(Debug, Clone, PartialEq)]
pub struct GuessRecord {
    /// Ladder position: `N = 2^j * base`.
    pub j: i32,
    pub n_guess: f64,
    /// Final regression error, or `None` if the guess failed.
    pub error: Option<f64>,
    pub columns: Option<usize>,
    pub levels: usize,
    pub failure: Option<String>,
}

impl GuessRecord {
    pub fn to_json(&self) -> Value {
        json!({
            "j": self.j,
            "n_guess": report::float(self.n_guess),
            "error": self.error.map(report::float).unwrap_or(Value::Null),
            "columns": self.columns,
            "levels": self.levels,
            "failure": self.failure,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BicriteriaResult {
    pub selected: ColumnSubset,
    /// `min_Y ||A - A_selected Y||_p`.
    pub error: f64,
    /// The minimizing `Y` (`|selected| x m`).
    pub coefficients: DenseMatrix,
    pub levels: usize,
    /// ℓ2 residual of the best rank-`k` approximation; the ladder base.
    pub base_norm: f64,
    pub guesses_tried: Vec<GuessRecord>,
    /// `2k * ceil(log2 m + 1) + 2k`.
    pub column_cap: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BicriteriaOptions {
    pub lambda: f64,
    pub max_rounds_per_level: usize,
    pub exec: Exec,
}

impl Default for BicriteriaOptions {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            max_rounds_per_level: DEFAULT_MAX_ROUNDS,
            exec: Exec::default(),
        }
    }
}

/// `2k * ceil(log2 m + 1) + 2k`.
pub fn column_cap(k: usize, m: usize) -> usize {
    2 * k * ((m as f64).log2() + 1.0).ceil() as usize + 2 * k
}

/// The ladder `(j, 2^j * base)` bracketing the optimal ℓp residual, using
/// `D^(1/p - 1/2)` (with `D = n m` entries) to convert between the ℓ2 and ℓp
/// norms of a residual. Returns a single tiny guess when `base` is zero.
pub fn guess_ladder(base: f64, a_norm: f64, p: PNorm, n: usize, m: usize) -> Vec<(i32, f64)> {
    if base <= 1e-12 * a_norm {
        return vec![(0, (EXACT_RANK_GUESS * a_norm).max(f64::MIN_POSITIVE))];
    }
    let d = (n * m) as f64;
    let factor = match p {
        PNorm::Infinity => d.powf(-0.5),
        PNorm::Finite(e) => d.powf(1.0 / e - 0.5),
    };
    let (lo, hi) = if factor >= 1.0 {
        (1.0, factor)
    } else {
        (factor, 1.0)
    };
    let j_lo = lo.log2().ceil() as i32;
    let j_hi = hi.log2().ceil() as i32 + 1;
    (j_lo..=j_hi).map(|j| (j, base * 2f64.powi(j))).collect()
}

/// Runs the sampler for every guess on the ladder and keeps the guess with
/// the smallest final regression error (earliest guess on ties). Guess `j`
/// draws from stream `j - j_lo` of the generator seeded by `seed`.
pub fn bicriteria_with_guessing(
    a: &DenseMatrix,
    k: usize,
    reg: &RegressionConfig,
    seed: u64,
    opts: BicriteriaOptions,
) -> Result<BicriteriaResult, BicriteriaError> {
    let (n, m) = a.shape();
    if k == 0 || k > n.min(m) {
        return Err(BicriteriaError::InvalidRank { k, limit: n.min(m) });
    }
    reg.validate()?;
    let p = reg.p;
    let svs = linalg::singular_values(a);
    let a_norm = svs.iter().map(|s| s * s).sum::<f64>().sqrt();
    let base = svs.iter().skip(k).map(|s| s * s).sum::<f64>().sqrt();
    let ladder = guess_ladder(base, a_norm, p, n, m);
    let runs = opts.exec.map(&ladder, |&(j, n_guess)| {
        let mut cfg = CoverageConfig::new(p, k, n_guess);
        cfg.lambda = opts.lambda;
        cfg.max_rounds_per_level = opts.max_rounds_per_level;
        let mut rng = trial_rng(seed, (j - ladder[0].0) as u64);
        let sel = match select_with(a, &cfg, reg, &mut rng, Exec::Sequential) {
            Ok(sel) => sel,
            Err(
                e @ (BicriteriaError::RoundsExhausted { .. } | BicriteriaError::InvalidConfig(_)),
            ) => {
                return Ok((
                    GuessRecord {
                        j,
                        n_guess,
                        error: None,
                        columns: None,
                        levels: 0,
                        failure: Some(e.to_string()),
                    },
                    None,
                ))
            }
            Err(e) => return Err(e),
        };
        let fit = fit_subset(a, &sel.selected, reg, Exec::Sequential)?;
        Ok((
            GuessRecord {
                j,
                n_guess,
                error: Some(fit.objective),
                columns: Some(sel.selected.len()),
                levels: sel.levels,
                failure: None,
            },
            Some((sel, fit.coefficients)),
        ))
    });
    let mut records = Vec::with_capacity(runs.len());
    let mut best: Option<(f64, Selection, DenseMatrix)> = None;
    for run in runs {
        let (rec, out) = run?;
        if let (Some(err), Some((sel, y))) = (rec.error, out) {
            if best.as_ref().is_none_or(|(e, _, _)| err < *e) {
                best = Some((err, sel, y));
            }
        }
        records.push(rec);
    }
    let Some((error, sel, coefficients)) = best else {
        return Err(BicriteriaError::AllGuessesFailed(records));
    };
    Ok(BicriteriaResult {
        selected: sel.selected,
        error,
        coefficients,
        levels: sel.levels,
        base_norm: base,
        guesses_tried: records,
        column_cap: column_cap(k, m),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_forms() {
        let cfg = CoverageConfig::new(PNorm::TWO, 2, 0.5);
        // 100 * 3 * 0.25 / 10 = 7.5 on the squared residual.
        assert!(cfg.covers(7.5f64.sqrt(), 10));
        assert!(!cfg.covers(7.6f64.sqrt(), 10));
        let inf = CoverageConfig::new(PNorm::Infinity, 2, 0.5);
        assert!(inf.covers(1.5, 1000));
        assert!(!inf.covers(1.51, 1000));
    }

    #[test]
    fn span_member_is_covered_and_unreachable_is_not() {
        let a = DenseMatrix::identity(4);
        let reg = RegressionConfig::new(PNorm::TWO);
        let cfg = CoverageConfig::new(PNorm::TWO, 1, 1e-6);
        let s = ColumnSubset::proper(vec![0, 1], 4).unwrap();
        assert!(!is_approximately_covered(&a, &s, 3, &cfg, &reg).unwrap());
        assert!(is_approximately_covered(&a, &s, 1, &cfg, &reg).unwrap());
    }

    #[test]
    fn small_inputs_return_every_column() {
        let a = DenseMatrix::from_fn(5, 4, |i, j| (i * 4 + j) as f64);
        let cfg = CoverageConfig::new(PNorm::ONE, 2, 1.0);
        let sel = select_columns(&a, &cfg, &RegressionConfig::new(PNorm::ONE), 1).unwrap();
        assert_eq!(sel.selected.indices(), &[0, 1, 2, 3]);
        assert_eq!(sel.levels, 0);
    }

    #[test]
    fn ladder_brackets() {
        let two = guess_ladder(1.0, 10.0, PNorm::TWO, 30, 64);
        assert_eq!(two, vec![(0, 1.0), (1, 2.0)]);
        let one = guess_ladder(1.0, 10.0, PNorm::ONE, 30, 64);
        assert_eq!(one.first().unwrap().0, 0);
        assert!(one.last().unwrap().1 >= 1920f64.sqrt());
        let inf = guess_ladder(1.0, 10.0, PNorm::Infinity, 30, 64);
        assert!(inf.first().unwrap().1 <= 1920f64.powf(-0.5) * 2.0);
        assert_eq!(inf.last().unwrap().0, 1);
        assert_eq!(guess_ladder(0.0, 3.0, PNorm::ONE, 4, 4).len(), 1);
    }

    #[test]
    fn exact_rank_input() {
        let inst = crate::adversarial::planted_instance(
            12,
            20,
            2,
            PNorm::ONE,
            crate::adversarial::NoiseKind::Gaussian,
            0.0,
            4,
        )
        .unwrap();
        let res = bicriteria_with_guessing(
            &inst.a,
            2,
            &RegressionConfig::new(PNorm::ONE),
            9,
            BicriteriaOptions::default(),
        )
        .unwrap();
        assert!(res.error < 1e-9 * inst.a.entrywise_norm(PNorm::ONE));
        assert!(res.selected.len() <= res.column_cap);
        assert_eq!(res.guesses_tried.len(), 1);
    }

    #[test]
    fn rejects_large_rank() {
        let a = DenseMatrix::identity(5);
        let err = bicriteria_with_guessing(
            &a,
            6,
            &RegressionConfig::new(PNorm::TWO),
            0,
            BicriteriaOptions::default(),
        );
        assert!(matches!(
            err,
            Err(BicriteriaError::InvalidRank { k: 6, limit: 5 })
        ));
    }

    #[test]
    fn same_seed_same_answer() {
        let inst = crate::adversarial::planted_instance(
            16,
            24,
            2,
            PNorm::TWO,
            crate::adversarial::NoiseKind::Gaussian,
            0.1,
            2,
        )
        .unwrap();
        let reg = RegressionConfig::new(PNorm::TWO);
        let seq = BicriteriaOptions {
            exec: Exec::Sequential,
            ..Default::default()
        };
        let a = bicriteria_with_guessing(&inst.a, 2, &reg, 5, seq).unwrap();
        let b =
            bicriteria_with_guessing(&inst.a, 2, &reg, 5, BicriteriaOptions::default()).unwrap();
        assert_eq!(a, b);
    }
}
