//! Numerical checks of the identities and inequalities behind the `c_{p,k}`
//! guarantee, randomized trial drivers for them, and an OPT oracle.
//!
//! The Λ map sends `a` (indexed by single columns) and `b` (indexed by
//! `k`-subsets) to a vector indexed by `(k+1)`-subsets:
//! `[Λ(a, b)]_I = sum_t (-1)^t a_{i_t} b_{I - i_t}` (0-based `t`). It is the
//! first-row Laplace expansion of a determinant and obeys
//! `||Λ(a, b)||_p <= M_p ||a||_p ||b||_p` with `M_p = max(1, (k+1)^(1-2/p))`.

use std::collections::HashMap;

use itertools::Itertools;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde_json::{json, Value};
use thiserror::Error;

use crate::combinatorics::{binomial, next_combination, rank_combination, sort_with_parity};
use crate::css::RatioBound;
use crate::linalg::{self, Lu};
use crate::matrix::{lp_norm, ColumnSubset, DenseMatrix, MatrixError, PNorm};
use crate::par::Exec;
use crate::regression::{
    err_of_subset, fit_subset, solve_matrix_in, RegressionConfig, RegressionError,
};
use crate::report;

/// Relative slack used by the exact identities and inequalities.
pub const IDENTITY_SLACK: f64 = 1e-9;

/// Largest number of ordered tuples enumerated by the weighted-average check.
const MAX_TUPLES: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VerifyError {
    #[error("the block V_J is singular")]
    SingularBlock,
    #[error("V has rank {rank} < k = {k}")]
    RankDeficient { rank: usize, k: usize },
    #[error("weights |det V_J|^p need a finite p")]
    InfiniteP,
    #[error("{0} ordered tuples are too many to enumerate")]
    TooManyTuples(usize),
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error(transparent)]
    Regression(#[from] RegressionError),
}

impl From<MatrixError> for VerifyError {
    fn from(e: MatrixError) -> Self {
        VerifyError::Regression(e.into())
    }
}

/// Both sides of a checked relation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Check {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// `M_p = max(1, (k+1)^(1-2/p))`; `k + 1` at `p = inf`.
pub fn m_p(p: PNorm, k: usize) -> f64 {
    let kp1 = (k + 1) as f64;
    match p {
        PNorm::Infinity => kp1,
        PNorm::Finite(e) => kp1.powf(1.0 - 2.0 / e).max(1.0),
    }
}

/// Inputs of Λ: `a` over `0..m`, `b` over the `k`-subsets of `0..m` in
/// lexicographic order.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaInstance {
    pub m: usize,
    pub k: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl LambdaInstance {
    pub fn new(m: usize, k: usize, a: Vec<f64>, b: Vec<f64>) -> Result<Self, VerifyError> {
        if k == 0 || m < k + 1 {
            return Err(VerifyError::InvalidInstance(format!(
                "need 1 <= k < m, got k = {k}, m = {m}"
            )));
        }
        let nb = binomial(m, k) as usize;
        if a.len() != m || b.len() != nb {
            return Err(VerifyError::InvalidInstance(format!(
                "expected |a| = {m}, |b| = {nb}, got {} and {}",
                a.len(),
                b.len()
            )));
        }
        Ok(Self { m, k, a, b })
    }

    /// `b` on an arbitrary `k`-sequence: zero on a repeated index, otherwise
    /// the value at the sorted subset times the sign of the sort.
    pub fn b_ext(&self, seq: &[usize]) -> f64 {
        let mut s = seq.to_vec();
        match sort_with_parity(&mut s) {
            0 => 0.0,
            sign => f64::from(sign) * self.b[rank_combination(&s, self.m)],
        }
    }

    /// Λ at an ordered `(k+1)`-sequence, repeats allowed.
    pub fn lambda_ordered(&self, seq: &[usize]) -> f64 {
        (0..seq.len())
            .map(|t| {
                let rest: Vec<usize> = seq
                    .iter()
                    .enumerate()
                    .filter(|&(s, _)| s != t)
                    .map(|(_, &i)| i)
                    .collect();
                let sign = if t % 2 == 0 { 1.0 } else { -1.0 };
                sign * self.a[seq[t]] * self.b_ext(&rest)
            })
            .sum()
    }
}

/// The index bookkeeping of Λ for fixed `(m, k)`, reusable across instances.
#[derive(Debug, Clone)]
pub struct LambdaPlan {
    m: usize,
    k: usize,
    /// For each `(k+1)`-subset: `(i_t, rank of I - i_t, (-1)^t)` per `t`.
    terms: Vec<Vec<(usize, usize, f64)>>,
}

impl LambdaPlan {
    pub fn new(m: usize, k: usize) -> Self {
        let mut terms = Vec::with_capacity(binomial(m, k + 1) as usize);
        let mut comb: Vec<usize> = (0..=k).collect();
        loop {
            let row = (0..=k)
                .map(|t| {
                    let rest: Vec<usize> = comb
                        .iter()
                        .enumerate()
                        .filter(|&(s, _)| s != t)
                        .map(|(_, &i)| i)
                        .collect();
                    let sign = if t % 2 == 0 { 1.0 } else { -1.0 };
                    (comb[t], rank_combination(&rest, m), sign)
                })
                .collect();
            terms.push(row);
            if !next_combination(&mut comb, m) {
                break;
            }
        }
        Self { m, k, terms }
    }

    pub fn apply(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        self.terms
            .iter()
            .map(|row| row.iter().map(|&(i, j, s)| s * a[i] * b[j]).sum())
            .collect()
    }
}

/// `Λ(a, b)` over the `(k+1)`-subsets in lexicographic order.
pub fn lambda_apply(inst: &LambdaInstance) -> Vec<f64> {
    LambdaPlan::new(inst.m, inst.k).apply(&inst.a, &inst.b)
}

/// `||Λ(a, b)||_p <= M_p ||a||_p ||b||_p`, with [`IDENTITY_SLACK`].
pub fn check_lambda_inequality(inst: &LambdaInstance, p: PNorm) -> Check {
    lambda_check_with(&LambdaPlan::new(inst.m, inst.k), inst, p)
}

fn lambda_check_with(plan: &LambdaPlan, inst: &LambdaInstance, p: PNorm) -> Check {
    debug_assert_eq!((plan.m, plan.k), (inst.m, inst.k));
    let lhs = lp_norm(&plan.apply(&inst.a, &inst.b), p);
    let rhs = m_p(p, inst.k) * lp_norm(&inst.a, p) * lp_norm(&inst.b, p);
    Check {
        lhs,
        rhs,
        holds: lhs <= rhs * (1.0 + IDENTITY_SLACK),
    }
}

/// `Err^p(A_J) <= ||Δ - Δ_J V_J^{-1} V||_p^p` with `Δ = A - U V`. Requires
/// `V_J` invertible; `slack` is relative.
pub fn check_lemma1(
    a: &DenseMatrix,
    u: &DenseMatrix,
    v: &DenseMatrix,
    subset: &ColumnSubset,
    reg: &RegressionConfig,
    slack: f64,
) -> Result<Check, VerifyError> {
    let p = reg.p;
    let delta = a.sub(&u.matmul(v)?)?;
    let vj = v.submatrix_columns(subset)?;
    let lu = Lu::new(&vj)?;
    if lu.is_singular() || lu.determinant() == 0.0 {
        return Err(VerifyError::SingularBlock);
    }
    let coef = lu.solve_matrix(v)?;
    let correction = delta.submatrix_columns(subset)?.matmul(&coef)?;
    let rhs = p.pow(delta.sub(&correction)?.entrywise_norm(p));
    let lhs = p.pow(err_of_subset(a, subset, reg)?);
    Ok(Check {
        lhs,
        rhs,
        holds: lhs <= rhs * (1.0 + slack),
    })
}

/// `det(V_J) (d - Δ_dJ V_J^{-1} V_i) = det([[d, Δ_dJ], [V_i, V_J]])`.
pub fn check_schur_identity(
    d: f64,
    delta_j: &[f64],
    v_i: &[f64],
    v_j: &DenseMatrix,
) -> Result<Check, VerifyError> {
    let k = v_j.rows();
    if v_j.cols() != k || delta_j.len() != k || v_i.len() != k {
        return Err(VerifyError::InvalidInstance(format!(
            "need a k x k block with length-k vectors, got {:?}, {}, {}",
            v_j.shape(),
            delta_j.len(),
            v_i.len()
        )));
    }
    let lu = Lu::new(v_j)?;
    if lu.is_singular() {
        return Err(VerifyError::SingularBlock);
    }
    let x = lu.solve(v_i)?;
    let lhs = lu.determinant() * (d - delta_j.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>());
    let bordered = DenseMatrix::from_fn(k + 1, k + 1, |r, c| match (r, c) {
        (0, 0) => d,
        (0, c) => delta_j[c - 1],
        (r, 0) => v_i[r - 1],
        (r, c) => v_j.get(r - 1, c - 1),
    });
    let rhs = bordered.determinant()?;
    Ok(Check {
        lhs,
        rhs,
        holds: (lhs - rhs).abs() <= IDENTITY_SLACK * rhs.abs().max(1.0),
    })
}

/// Both sides of the averaging argument for one matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedAverage {
    /// `min_J Err^p(A_J)`.
    pub best_err_p: f64,
    /// `sum_J w_J Err^p(A_J)` over ordered tuples.
    pub weighted_avg: f64,
    /// `C_{p,k} ||Δ||_p^p` for the ℓ2-optimal `Δ`.
    pub bound: f64,
    pub weights_sum: f64,
    pub min_le_avg: bool,
    pub avg_le_bound: bool,
    pub best_le_bound: bool,
}

impl WeightedAverage {
    pub fn holds(&self) -> bool {
        self.min_le_avg && self.avg_le_bound && self.best_le_bound
    }
}

/// Uses the ℓ2-optimal rank-`k` pair `(U, V)` to define `Δ` and the weights
/// `w_J = |det V_J|^p / sum_I |det V_I|^p` over ordered `k`-tuples (zero on
/// repeats). `slack` applies to the two comparisons against the bound.
pub fn check_weighted_average_bound(
    a: &DenseMatrix,
    k: usize,
    reg: &RegressionConfig,
    slack: f64,
) -> Result<WeightedAverage, VerifyError> {
    let PNorm::Finite(pe) = reg.p else {
        return Err(VerifyError::InfiniteP);
    };
    let (n, m) = a.shape();
    if k == 0 || k > n.min(m) {
        return Err(VerifyError::InvalidInstance(format!(
            "rank {k} for a {n}x{m} matrix"
        )));
    }
    let tuples = m.checked_pow(k as u32).unwrap_or(usize::MAX);
    if tuples > MAX_TUPLES {
        return Err(VerifyError::TooManyTuples(tuples));
    }
    let (u, v, _) = linalg::best_rank_k(a, k);
    let rank = v.numerical_rank(1e-10);
    if rank < k {
        return Err(VerifyError::RankDeficient { rank, k });
    }
    let delta = a.sub(&u.matmul(&v)?)?;
    let mut errs: HashMap<Vec<usize>, f64> = HashMap::new();
    let mut total_w = 0.0;
    let mut acc = 0.0;
    let mut weights = Vec::new();
    for seq in std::iter::repeat_n(0..m, k).multi_cartesian_product() {
        let mut sorted = seq.clone();
        if sort_with_parity(&mut sorted) == 0 {
            weights.push(0.0);
            continue;
        }
        let w = v.select_columns(&seq).determinant()?.abs().powf(pe);
        weights.push(w);
        total_w += w;
        let err_p = match errs.get(&sorted) {
            Some(&e) => e,
            None => {
                let subset = ColumnSubset::proper(sorted.clone(), m)?;
                let e = reg
                    .p
                    .pow(fit_subset(a, &subset, reg, Exec::Sequential)?.objective);
                errs.insert(sorted, e);
                e
            }
        };
        acc += w * err_p;
    }
    if total_w == 0.0 {
        return Err(VerifyError::RankDeficient { rank: 0, k });
    }
    let weighted_avg = acc / total_w;
    let weights_sum = weights.iter().map(|w| w / total_w).sum();
    let best_err_p = errs.values().copied().fold(f64::INFINITY, f64::min);
    let c_pow = RatioBound::new(reg.p, k).c_pow().expect("finite p");
    let bound = c_pow * reg.p.pow(delta.entrywise_norm(reg.p));
    Ok(WeightedAverage {
        best_err_p,
        weighted_avg,
        bound,
        weights_sum,
        min_le_avg: best_err_p <= weighted_avg * (1.0 + IDENTITY_SLACK),
        avg_le_bound: weighted_avg <= bound * (1.0 + slack),
        best_le_bound: best_err_p <= bound * (1.0 + slack),
    })
}

/// Settings of the alternating-minimization OPT oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig {
    pub restarts: usize,
    pub inner_iters: usize,
    pub seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            restarts: 10,
            inner_iters: 50,
            seed: 0,
        }
    }
}

/// An upper bound on `min_{rank X <= k} ||A - X||_p`: exact at `p = 2`,
/// otherwise the best of `restarts` alternating minimizations. Restart 0
/// starts from the ℓ2 solution; restart `i > 0` from a Gaussian left factor
/// drawn from stream `i` of the seeded generator, so the result can only
/// decrease as `restarts` grows.
pub fn opt_oracle(
    a: &DenseMatrix,
    k: usize,
    cfg: &OracleConfig,
    reg: &RegressionConfig,
) -> Result<f64, VerifyError> {
    if cfg.restarts == 0 {
        return Err(VerifyError::InvalidInstance(
            "oracle needs at least one restart".into(),
        ));
    }
    let (n, m) = a.shape();
    if k == 0 || k > n.min(m) {
        return Err(VerifyError::InvalidInstance(format!(
            "rank {k} for a {n}x{m} matrix"
        )));
    }
    let (u0, _, tail) = linalg::best_rank_k(a, k);
    if reg.p == PNorm::TWO {
        return Ok(tail);
    }
    let at = a.transpose();
    let mut best = f64::INFINITY;
    for restart in 0..cfg.restarts {
        let mut u = if restart == 0 {
            u0.clone()
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(restart as u64);
            DenseMatrix::from_fn(n, k, |_, _| rng.sample(StandardNormal))
        };
        let mut last = f64::INFINITY;
        for _ in 0..cfg.inner_iters.max(1) {
            let v = solve_matrix_in(&u, a, reg, Exec::Sequential)?.coefficients;
            let fit = solve_matrix_in(&v.transpose(), &at, reg, Exec::Sequential)?;
            u = fit.coefficients.transpose();
            let obj = fit.objective;
            best = best.min(obj);
            if !(obj < last * (1.0 - 1e-9)) {
                break;
            }
            last = obj;
        }
    }
    Ok(best)
}

/// Pass/fail counts of a randomized trial run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSummary {
    pub check: String,
    pub trials: usize,
    pub passed: usize,
    pub failed: usize,
    /// Trials whose precondition did not hold (e.g. a singular block).
    pub skipped: usize,
    /// Largest `lhs / rhs` seen (or `|lhs - rhs| / max(1, |rhs|)` for
    /// identities).
    pub max_ratio: f64,
}

impl TrialSummary {
    pub fn new(check: &str) -> Self {
        Self {
            check: check.to_string(),
            trials: 0,
            passed: 0,
            failed: 0,
            skipped: 0,
            max_ratio: 0.0,
        }
    }

    fn record(&mut self, outcome: Option<(bool, f64)>) {
        self.trials += 1;
        match outcome {
            None => self.skipped += 1,
            Some((holds, ratio)) => {
                if holds {
                    self.passed += 1;
                } else {
                    self.failed += 1;
                }
                if ratio.is_finite() {
                    self.max_ratio = self.max_ratio.max(ratio);
                }
            }
        }
    }

    pub fn merge(&mut self, other: &TrialSummary) {
        self.trials += other.trials;
        self.passed += other.passed;
        self.failed += other.failed;
        self.skipped += other.skipped;
        self.max_ratio = self.max_ratio.max(other.max_ratio);
    }

    pub fn all_passed(&self) -> bool {
        self.failed == 0
    }

    pub fn to_json(&self) -> Value {
        json!({
            "check": self.check,
            "trials": self.trials,
            "passed": self.passed,
            "failed": self.failed,
            "skipped": self.skipped,
            "max_ratio": report::float(self.max_ratio),
        })
    }
}

/// Generator for trial `trial`: stream `trial` of a seeded ChaCha8, so each
/// trial draws the same numbers under any schedule.
pub fn trial_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn gaussian_vec(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.sample(StandardNormal)).collect()
}

fn gaussian_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Draws `len` entries of one of three shapes, picked by `kind % 3`:
/// Gaussian, sparse Gaussian, or random signs.
fn lambda_entries(rng: &mut impl Rng, len: usize, kind: u64) -> Vec<f64> {
    match kind % 3 {
        0 => gaussian_vec(rng, len),
        1 => (0..len)
            .map(|_| {
                if rng.random_bool(0.3) {
                    rng.sample(StandardNormal)
                } else {
                    0.0
                }
            })
            .collect(),
        _ => (0..len)
            .map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 })
            .collect(),
    }
}

/// One grid cell of the Λ suite.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaCell {
    pub p: PNorm,
    pub k: usize,
    pub m: usize,
    pub summary: TrialSummary,
}

/// Runs `trials` random instances for every `(p, k, m)` with
/// `m in k+1..=m_max`. Instances depend on `(seed, k, m, trial)` only, so
/// every `p` sees the same draws.
pub fn run_lambda_grid(
    ps: &[PNorm],
    ks: &[usize],
    m_max: usize,
    trials: usize,
    seed: u64,
    exec: Exec,
) -> Vec<LambdaCell> {
    let mut cells = Vec::new();
    for &k in ks {
        for m in k + 1..=m_max {
            let plan = LambdaPlan::new(m, k);
            let nb = binomial(m, k) as usize;
            let instances = exec.map_range(trials, |t| {
                let stream = ((k as u64) << 48) | ((m as u64) << 40) | t as u64;
                let mut rng = trial_rng(seed, stream);
                let a = lambda_entries(&mut rng, m, t as u64);
                let b = lambda_entries(&mut rng, nb, t as u64 / 3);
                LambdaInstance { m, k, a, b }
            });
            for &p in ps {
                let checks = exec.map(&instances, |inst| lambda_check_with(&plan, inst, p));
                let mut summary = TrialSummary::new("lambda");
                for c in checks {
                    summary.record(Some((c.holds, ratio(c.lhs, c.rhs))));
                }
                cells.push(LambdaCell { p, k, m, summary });
            }
        }
    }
    cells
}

fn ratio(lhs: f64, rhs: f64) -> f64 {
    if rhs > 0.0 {
        lhs / rhs
    } else if lhs == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Exponents cycled through when a trial driver is not pinned to one `p`.
pub const TRIAL_PS: [PNorm; 5] = [
    PNorm::ONE,
    PNorm::Finite(1.5),
    PNorm::TWO,
    PNorm::Finite(3.0),
    PNorm::Infinity,
];

/// [`check_lemma1`] trials on random `4 x 5` matrices with the ℓ2-optimal `(U, V)`
/// and a random subset `J`. Without `p` the exponent cycles through
/// [`TRIAL_PS`]; without `k` the rank alternates between 1 and 2.
pub fn run_lemma1_trials(
    trials: usize,
    seed: u64,
    p: Option<PNorm>,
    k: Option<usize>,
    slack: f64,
    exec: Exec,
) -> Result<TrialSummary, VerifyError> {
    let (n, m) = (4, 5);
    if let Some(k) = k {
        if k == 0 || k > n {
            return Err(VerifyError::InvalidInstance(format!(
                "rank {k} for a {n}x{m} matrix"
            )));
        }
    }
    let outcomes = exec.map_range(trials, |t| {
        let mut rng = trial_rng(seed, t as u64);
        let p = p.unwrap_or(TRIAL_PS[t % TRIAL_PS.len()]);
        let k = k.unwrap_or(1 + t % 2);
        let a = gaussian_matrix(&mut rng, n, m);
        let (u, v, _) = linalg::best_rank_k(&a, k);
        let mut idx = index::sample(&mut rng, m, k).into_vec();
        idx.sort_unstable();
        let subset = ColumnSubset::proper(idx, m)?;
        match check_lemma1(&a, &u, &v, &subset, &RegressionConfig::new(p), slack) {
            Ok(c) => Ok(Some((c.holds, ratio(c.lhs, c.rhs)))),
            Err(VerifyError::SingularBlock) => Ok(None),
            Err(e) => Err(e),
        }
    });
    let mut summary = TrialSummary::new("lemma1");
    for o in outcomes {
        summary.record(o?);
    }
    Ok(summary)
}

/// Schur-identity trials on Gaussian blocks; `k` cycles through 1..=3
/// unless pinned.
pub fn run_schur_trials(
    trials: usize,
    seed: u64,
    k: Option<usize>,
    exec: Exec,
) -> Result<TrialSummary, VerifyError> {
    if k == Some(0) {
        return Err(VerifyError::InvalidInstance("k must be positive".into()));
    }
    let outcomes = exec.map_range(trials, |t| {
        let mut rng = trial_rng(seed, t as u64);
        let k = k.unwrap_or(1 + t % 3);
        let d: f64 = rng.sample(StandardNormal);
        let dj = gaussian_vec(&mut rng, k);
        let vi = gaussian_vec(&mut rng, k);
        let vj = gaussian_matrix(&mut rng, k, k);
        match check_schur_identity(d, &dj, &vi, &vj) {
            Ok(c) => Ok(Some((
                c.holds,
                (c.lhs - c.rhs).abs() / c.rhs.abs().max(1.0),
            ))),
            Err(VerifyError::SingularBlock) => Ok(None),
            Err(e) => Err(e),
        }
    });
    let mut summary = TrialSummary::new("schur");
    for o in outcomes {
        summary.record(o?);
    }
    Ok(summary)
}

/// Weighted-average trials on random `4 x 6` matrices. Without `p` the
/// exponent cycles through the finite members of [`TRIAL_PS`]; without `k`
/// the rank alternates between 1 and 2. The recorded ratio is
/// `Err^p(A_{J*}) / (C_{p,k} ||Δ||_p^p)`.
pub fn run_weighted_trials(
    trials: usize,
    seed: u64,
    p: Option<PNorm>,
    k: Option<usize>,
    slack: f64,
    exec: Exec,
) -> Result<TrialSummary, VerifyError> {
    if p.is_some_and(|p| p.is_infinite()) {
        return Err(VerifyError::InfiniteP);
    }
    let finite: Vec<PNorm> = TRIAL_PS
        .iter()
        .copied()
        .filter(|p| !p.is_infinite())
        .collect();
    let outcomes = exec.map_range(trials, |t| {
        let mut rng = trial_rng(seed, t as u64);
        let p = p.unwrap_or(finite[t % finite.len()]);
        let k = k.unwrap_or(1 + t % 2);
        let a = gaussian_matrix(&mut rng, 4, 6);
        match check_weighted_average_bound(&a, k, &RegressionConfig::new(p), slack) {
            Ok(w) => Ok(Some((w.holds(), ratio(w.best_err_p, w.bound)))),
            Err(VerifyError::RankDeficient { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    });
    let mut summary = TrialSummary::new("weighted");
    for o in outcomes {
        summary.record(o?);
    }
    Ok(summary)
}
