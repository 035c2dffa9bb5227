//! Entry-wise ℓp regression: `min_x ||U x - b||_p` and its column-decoupled
//! matrix form `min_Y ||A - U Y||_p`.
//!
//! Finite `p != 2` is solved by iteratively reweighted least squares on the
//! smoothed objective `sum (r_i^2 + eps^2)^(p/2)`. Each iteration takes the
//! weighted least-squares correction as a search direction and then runs an
//! exact line search along it, so the smoothed objective never increases.
//! For `p < 2` the smoothing level follows a halving schedule; for large `p`
//! and for `p = inf` the exponent itself is raised along a doubling ladder,
//! warm-starting each level from the previous one. The max-norm solve ends
//! with a Chebyshev equal-ripple exchange and the `p = 1` solve with a basic
//! (vertex) solution polish; both are accepted only when they lower the true
//! objective.

use thiserror::Error;

use crate::linalg::{self, Lu};
use crate::matrix::{lp_norm, ColumnSubset, DenseMatrix, MatrixError, PNorm};
use crate::par::Exec;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegressionError {
    #[error("invalid regression config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

/// Solver settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressionConfig {
    pub p: PNorm,
    /// Iteration cap per smoothing level (or per exponent on a ladder).
    pub max_iters: usize,
    /// Smoothing floor, relative to `||b||_inf`.
    pub smoothing_eps: f64,
    /// Relative decrease of the smoothed objective below which a level stalls.
    pub rel_tol: f64,
    /// Informational; recorded in reports, not used by the solver.
    pub restarts: usize,
}

impl RegressionConfig {
    pub fn new(p: PNorm) -> Self {
        Self {
            p,
            max_iters: 500,
            smoothing_eps: 1e-10,
            rel_tol: 1e-9,
            restarts: 1,
        }
    }

    pub fn validate(&self) -> Result<(), RegressionError> {
        if let PNorm::Finite(p) = self.p {
            if !(p >= 1.0) {
                return Err(RegressionError::InvalidConfig(format!("p = {p} < 1")));
            }
        }
        if !(self.smoothing_eps > 0.0) {
            return Err(RegressionError::InvalidConfig(
                "smoothing_eps must be positive".into(),
            ));
        }
        if !(self.rel_tol > 0.0) {
            return Err(RegressionError::InvalidConfig(
                "rel_tol must be positive".into(),
            ));
        }
        if self.max_iters == 0 {
            return Err(RegressionError::InvalidConfig(
                "max_iters must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// A regression result; `coefficients` is a vector or a `k x m` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionSolution<C> {
    pub coefficients: C,
    /// `||residual||_p` recomputed from `coefficients`.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Set when the design matrix has numerical rank below its column count;
    /// the solve is then carried out in the least-norm sense.
    pub rank_deficient: bool,
    /// For `p = inf`: the bound `||r_q||_q / n^(1/q)` from the last exponent
    /// on the ladder, an estimate from below of the optimal max-residual.
    pub lower_bound: Option<f64>,
}

const RANK_RCOND: f64 = 1e-10;
const LADDER_TOP: f64 = 65536.0;

/// A prepared solver for a fixed design matrix `U`; reusable across many
/// right-hand sides.
#[derive(Debug, Clone)]
pub struct LpSolver<'a> {
    u: &'a DenseMatrix,
    cfg: RegressionConfig,
    pinv: DenseMatrix,
    rank: usize,
}

impl<'a> LpSolver<'a> {
    pub fn new(u: &'a DenseMatrix, cfg: RegressionConfig) -> Result<Self, RegressionError> {
        cfg.validate()?;
        let (pinv, rank) = linalg::pseudo_inverse(u, RANK_RCOND);
        Ok(Self { u, cfg, pinv, rank })
    }

    pub fn config(&self) -> &RegressionConfig {
        &self.cfg
    }

    pub fn rank_deficient(&self) -> bool {
        self.rank < self.u.cols()
    }

    pub fn solve(&self, b: &[f64]) -> Result<RegressionSolution<Vec<f64>>, RegressionError> {
        self.solve_inner(b, None)
    }

    /// Like [`solve`](Self::solve), also returning the smoothed objective
    /// (as a norm) after every accepted iteration.
    pub fn solve_with_history(
        &self,
        b: &[f64],
    ) -> Result<(RegressionSolution<Vec<f64>>, Vec<f64>), RegressionError> {
        let mut hist = Vec::new();
        let sol = self.solve_inner(b, Some(&mut hist))?;
        Ok((sol, hist))
    }

    fn solve_inner(
        &self,
        b: &[f64],
        mut hist: Option<&mut Vec<f64>>,
    ) -> Result<RegressionSolution<Vec<f64>>, RegressionError> {
        let (n, k) = self.u.shape();
        if b.len() != n {
            return Err(MatrixError::ShapeMismatch {
                op: "lp regression",
                left: self.u.shape(),
                right: (b.len(), 1),
            }
            .into());
        }
        let p = self.cfg.p;
        let bmax = lp_norm(b, PNorm::Infinity);
        let rank_deficient = self.rank_deficient();
        let mut x = self.pinv.mul_vec(b)?;
        if bmax == 0.0 {
            return Ok(self.finish(b, vec![0.0; k], 0, true, None));
        }
        let mut ws = Workspace::new(n, k);
        let mut iterations = 0;
        let mut converged = true;
        let mut lower_bound = None;
        match p {
            PNorm::Finite(2.0) => {}
            PNorm::Finite(pe) if pe < 2.0 => {
                let floor = self.cfg.smoothing_eps * bmax;
                let mut eps = (1e-2 * bmax).max(floor);
                loop {
                    let lvl = self.minimize_level(b, &mut x, pe, eps, &mut ws, hist.as_deref_mut());
                    iterations += lvl.iterations;
                    converged = lvl.stalled;
                    // Once the smoothing is small the iterate sits near an
                    // optimal vertex; stop as soon as one is certified.
                    if pe == 1.0 && eps <= 1e-2 * bmax {
                        if let Some(y) = self.certified_vertex(b, &x) {
                            x = y;
                            converged = true;
                            break;
                        }
                    }
                    if eps <= floor {
                        break;
                    }
                    eps = (eps * 0.5).max(floor);
                }
                if pe == 1.0 {
                    self.polish_l1(b, &mut x);
                }
            }
            PNorm::Finite(pe) => {
                for q in exponent_ladder(pe) {
                    let lvl = self.minimize_level(b, &mut x, q, 0.0, &mut ws, hist.as_deref_mut());
                    iterations += lvl.iterations;
                    converged = lvl.stalled;
                }
            }
            PNorm::Infinity => {
                let mut best = x.clone();
                let mut best_obj = self.residual_norm(b, &x, PNorm::Infinity);
                let mut last_q = 2.0;
                let mut certified = None;
                for q in exponent_ladder(LADDER_TOP) {
                    // History is recorded per ladder level; levels use
                    // different exponents and are not comparable.
                    let lvl = self.minimize_level(b, &mut x, q, 0.0, &mut ws, None);
                    iterations += lvl.iterations;
                    converged = lvl.stalled;
                    last_q = q;
                    let obj = self.residual_norm(b, &x, PNorm::Infinity);
                    if obj < best_obj {
                        best_obj = obj;
                        best.clone_from(&x);
                    }
                    if q >= 4.0 {
                        if let Some(ex) = self.exchange(b, &x).filter(|ex| ex.optimal) {
                            certified = Some(ex);
                            break;
                        }
                    }
                }
                let rq = self.residual_norm(b, &x, PNorm::Finite(last_q));
                let ladder_bound = rq * (n as f64).powf(-1.0 / last_q);
                match certified {
                    Some(ex) => {
                        x = ex.y;
                        converged = true;
                        lower_bound = Some(ladder_bound.max(ex.h));
                    }
                    None => {
                        x = best;
                        let dual = self.polish_linf(b, &mut x);
                        lower_bound = Some(dual.map_or(ladder_bound, |h| h.max(ladder_bound)));
                    }
                }
            }
        }
        let mut sol = self.finish(b, x, iterations, converged, lower_bound);
        sol.rank_deficient = rank_deficient;
        if let Some(lb) = sol.lower_bound.as_mut() {
            *lb = lb.min(sol.objective);
        }
        Ok(sol)
    }

    fn finish(
        &self,
        b: &[f64],
        x: Vec<f64>,
        iterations: usize,
        converged: bool,
        lower_bound: Option<f64>,
    ) -> RegressionSolution<Vec<f64>> {
        let objective = self.residual_norm(b, &x, self.cfg.p);
        RegressionSolution {
            coefficients: x,
            objective,
            iterations,
            converged,
            rank_deficient: self.rank_deficient(),
            lower_bound,
        }
    }

    fn residual(&self, b: &[f64], x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = b[i] - dot(self.u.row(i), x);
        }
    }

    fn residual_norm(&self, b: &[f64], x: &[f64], p: PNorm) -> f64 {
        let mut r = vec![0.0; b.len()];
        self.residual(b, x, &mut r);
        lp_norm(&r, p)
    }

    /// IRLS with exact line search at a fixed exponent and smoothing level.
    fn minimize_level(
        &self,
        b: &[f64],
        x: &mut [f64],
        p: f64,
        eps: f64,
        ws: &mut Workspace,
        mut hist: Option<&mut Vec<f64>>,
    ) -> LevelOutcome {
        let (n, k) = self.u.shape();
        let mut r = vec![0.0; n];
        let mut v = vec![0.0; n];
        let mut trial = vec![0.0; n];
        let mut sw = vec![0.0; n];
        for it in 0..self.cfg.max_iters {
            self.residual(b, x, &mut r);
            let scale = r.iter().fold(eps, |m, x| m.max(x.abs()));
            if scale == 0.0 {
                return LevelOutcome {
                    iterations: it,
                    stalled: true,
                };
            }
            let e = eps / scale;
            for (s, &ri) in sw.iter_mut().zip(&r) {
                let y = ri / scale;
                *s = (y * y + e * e).powf(0.25 * (p - 2.0));
            }
            let delta = self.weighted_lstsq(&sw, &r, ws);
            for (i, vi) in v.iter_mut().enumerate() {
                *vi = dot(self.u.row(i), &delta);
            }
            let before = smoothed_norm(&r, p, eps);
            let t = line_search(&r, &v, p, eps);
            let mut after = f64::INFINITY;
            let mut step = 0.0;
            for cand in [t, 1.0] {
                if !(cand > 0.0) || cand == step {
                    continue;
                }
                for i in 0..n {
                    trial[i] = r[i] - cand * v[i];
                }
                let val = smoothed_norm(&trial, p, eps);
                if val < after {
                    after = val;
                    step = cand;
                }
                if after < before {
                    break;
                }
            }
            if !(after < before) {
                return LevelOutcome {
                    iterations: it + 1,
                    stalled: true,
                };
            }
            for j in 0..k {
                x[j] += step * delta[j];
            }
            if let Some(h) = hist.as_deref_mut() {
                h.push(after);
            }
            if before - after <= self.cfg.rel_tol * before {
                return LevelOutcome {
                    iterations: it + 1,
                    stalled: true,
                };
            }
        }
        LevelOutcome {
            iterations: self.cfg.max_iters,
            stalled: false,
        }
    }

    /// Minimizes `|| diag(sw) (c - U d) ||_2` over `d`. Householder QR when
    /// the weighted system is well conditioned, SVD least-norm otherwise.
    fn weighted_lstsq(&self, sw: &[f64], c: &[f64], ws: &mut Workspace) -> Vec<f64> {
        let (n, k) = self.u.shape();
        if !self.rank_deficient() && n >= k {
            if let Some(d) = ws.qr_solve(self.u, sw, c) {
                return d;
            }
        }
        let m = nalgebra::DMatrix::from_fn(n, k, |i, j| sw[i] * self.u.get(i, j));
        let rhs: Vec<f64> = sw.iter().zip(c).map(|(s, c)| s * c).collect();
        linalg::least_squares_min_norm(&m, &rhs, 1e-13).0
    }

    /// Replaces `x` by the basic solution interpolating the `rank` smallest
    /// residuals, when that lowers the ℓ1 objective.
    fn polish_l1(&self, b: &[f64], x: &mut Vec<f64>) {
        let (n, k) = self.u.shape();
        if self.rank_deficient() || n < k {
            return;
        }
        let mut cur = self.residual_norm(b, x, PNorm::ONE);
        let mut r = vec![0.0; n];
        for _ in 0..3 {
            self.residual(b, x, &mut r);
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&i, &j| r[i].abs().total_cmp(&r[j].abs()));
            let active = &order[..k];
            let sys = self.u.select_rows(active);
            let rhs: Vec<f64> = active.iter().map(|&i| b[i]).collect();
            let Ok(y) = Lu::new(&sys).and_then(|lu| lu.solve(&rhs)) else {
                return;
            };
            if y.iter().any(|v| !v.is_finite()) {
                return;
            }
            let obj = self.residual_norm(b, &y, PNorm::ONE);
            if obj < cur {
                cur = obj;
                *x = y;
            } else {
                return;
            }
        }
    }

    /// The basic solution interpolating the `k` smallest residuals of `x`,
    /// returned only when the ℓ1 optimality condition certifies it: some
    /// `g` in `[-1, 1]^k` with `U_Z^T g = -sum_{i not in Z} sign(r_i) u_i`.
    fn certified_vertex(&self, b: &[f64], x: &[f64]) -> Option<Vec<f64>> {
        let (n, k) = self.u.shape();
        if self.rank_deficient() || n < k {
            return None;
        }
        let mut r = vec![0.0; n];
        self.residual(b, x, &mut r);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| r[i].abs().total_cmp(&r[j].abs()));
        let (active, rest) = order.split_at(k);
        let lu = Lu::new(&self.u.select_rows(active)).ok()?;
        let rhs: Vec<f64> = active.iter().map(|&i| b[i]).collect();
        let y = lu.solve(&rhs).ok()?;
        self.residual(b, &y, &mut r);
        let tiny = 1e-13 * lp_norm(b, PNorm::Infinity);
        let mut pull = vec![0.0; k];
        for &i in rest {
            if r[i].abs() <= tiny {
                return None;
            }
            let s = r[i].signum();
            for (pj, uj) in pull.iter_mut().zip(self.u.row(i)) {
                *pj -= s * uj;
            }
        }
        let g = Lu::new(&self.u.select_rows(active).transpose())
            .ok()?
            .solve(&pull)
            .ok()?;
        if g.iter().all(|v| v.abs() <= 1.0 + 1e-10) {
            Some(y)
        } else {
            None
        }
    }

    /// One equal-ripple exchange step on the `k + 1` largest residuals of
    /// `x`: solves `u_i . y + s_i h = b_i` with `s_i = sign(r_i)`, together
    /// with the dual weights `lambda >= 0`, `sum lambda = 1`,
    /// `sum lambda_i s_i u_i = 0`. When the weights are feasible, `h` is a
    /// lower bound on the optimal max-residual.
    fn exchange(&self, b: &[f64], x: &[f64]) -> Option<Exchange> {
        let (n, k) = self.u.shape();
        if self.rank_deficient() || n < k + 1 {
            return None;
        }
        let mut r = vec![0.0; n];
        self.residual(b, x, &mut r);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| r[j].abs().total_cmp(&r[i].abs()));
        let active = &order[..=k];
        let sign = |i: usize| if r[i] < 0.0 { -1.0 } else { 1.0 };
        let sys = DenseMatrix::from_fn(k + 1, k + 1, |a, j| {
            let i = active[a];
            if j < k {
                self.u.get(i, j)
            } else {
                sign(i)
            }
        });
        let rhs: Vec<f64> = active.iter().map(|&i| b[i]).collect();
        let sol = Lu::new(&sys).ok()?.solve(&rhs).ok()?;
        let (y, h) = (sol[..k].to_vec(), sol[k]);
        if y.iter().any(|v| !v.is_finite()) || !h.is_finite() {
            return None;
        }
        let dual_sys = DenseMatrix::from_fn(k + 1, k + 1, |j, a| {
            let i = active[a];
            if j < k {
                sign(i) * self.u.get(i, j)
            } else {
                1.0
            }
        });
        let mut e = vec![0.0; k + 1];
        e[k] = 1.0;
        let dual_ok = Lu::new(&dual_sys)
            .and_then(|lu| lu.solve(&e))
            .is_ok_and(|lam| lam.iter().all(|&l| l >= 0.0));
        let obj = self.residual_norm(b, &y, PNorm::Infinity);
        Some(Exchange {
            optimal: dual_ok && h > 0.0 && obj <= h * (1.0 + 1e-12),
            dual_ok: dual_ok && h > 0.0,
            y,
            h,
            obj,
        })
    }

    /// Repeated exchange steps, keeping `y` while the max-residual drops.
    /// Returns the best dual lower bound met on the way.
    fn polish_linf(&self, b: &[f64], x: &mut Vec<f64>) -> Option<f64> {
        let k = self.u.cols();
        let mut cur = self.residual_norm(b, x, PNorm::Infinity);
        let mut bound: Option<f64> = None;
        for _ in 0..(2 * k + 4) {
            let Some(ex) = self.exchange(b, x) else {
                break;
            };
            if ex.dual_ok {
                bound = Some(bound.map_or(ex.h, |v| v.max(ex.h)));
            }
            if ex.obj < cur {
                cur = ex.obj;
                *x = ex.y;
            } else {
                break;
            }
        }
        bound
    }
}

struct Exchange {
    y: Vec<f64>,
    h: f64,
    obj: f64,
    dual_ok: bool,
    optimal: bool,
}

struct LevelOutcome {
    iterations: usize,
    stalled: bool,
}

/// Scratch space for the Householder least-squares kernel.
struct Workspace {
    a: Vec<f64>,
    y: Vec<f64>,
    diag: Vec<f64>,
}

impl Workspace {
    fn new(n: usize, k: usize) -> Self {
        Self {
            a: vec![0.0; n * k],
            y: vec![0.0; n],
            diag: vec![0.0; k],
        }
    }

    /// Householder QR on the column-major buffer `diag(sw) U`. Returns `None`
    /// when `R` is numerically singular.
    fn qr_solve(&mut self, u: &DenseMatrix, sw: &[f64], c: &[f64]) -> Option<Vec<f64>> {
        let (n, k) = u.shape();
        let a = &mut self.a;
        for i in 0..n {
            let row = u.row(i);
            for j in 0..k {
                a[j * n + i] = sw[i] * row[j];
            }
            self.y[i] = sw[i] * c[i];
        }
        for j in 0..k {
            let col = j * n;
            let sigma = a[col + j..col + n]
                .iter()
                .map(|x| x * x)
                .sum::<f64>()
                .sqrt();
            if sigma == 0.0 || !sigma.is_finite() {
                return None;
            }
            let x0 = a[col + j];
            let alpha = if x0 > 0.0 { -sigma } else { sigma };
            a[col + j] = x0 - alpha;
            let beta = a[col + j..col + n].iter().map(|x| x * x).sum::<f64>();
            if beta > 0.0 {
                for l in j + 1..k {
                    let cl = l * n;
                    let s: f64 = (j..n).map(|i| a[col + i] * a[cl + i]).sum();
                    let f = 2.0 * s / beta;
                    for i in j..n {
                        a[cl + i] -= f * a[col + i];
                    }
                }
                let s: f64 = (j..n).map(|i| a[col + i] * self.y[i]).sum();
                let f = 2.0 * s / beta;
                for i in j..n {
                    self.y[i] -= f * a[col + i];
                }
            }
            self.diag[j] = alpha;
        }
        let dmax = self.diag.iter().fold(0.0_f64, |m, d| m.max(d.abs()));
        if self.diag.iter().any(|d| d.abs() <= 1e-13 * dmax) {
            return None;
        }
        let mut d = vec![0.0; k];
        for j in (0..k).rev() {
            let s: f64 = (j + 1..k).map(|l| a[l * n + j] * d[l]).sum();
            d[j] = (self.y[j] - s) / self.diag[j];
        }
        d.iter().all(|v| v.is_finite()).then_some(d)
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Exponents `4, 8, 16, ...` strictly below `top`, followed by `top`.
fn exponent_ladder(top: f64) -> Vec<f64> {
    let mut qs = Vec::new();
    let mut q = 4.0;
    while q < top {
        qs.push(q);
        q *= 2.0;
    }
    qs.push(top);
    qs
}

/// `(sum (r_i^2 + eps^2)^(p/2))^(1/p)`, evaluated with max-scaling.
fn smoothed_norm(r: &[f64], p: f64, eps: f64) -> f64 {
    let scale = r.iter().fold(eps, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    let e = eps / scale;
    let s: f64 = r
        .iter()
        .map(|&x| {
            let y = x / scale;
            (y * y + e * e).powf(0.5 * p)
        })
        .sum();
    scale * s.powf(1.0 / p)
}

/// Derivative information for `t -> sum phi(r_i - t v_i)` at `t`: returns
/// `(d1, newton_step)` where `d1` carries the exact sign of the first
/// derivative (it is divided by a positive scale) and `newton_step` is
/// `d1 / d2` in unscaled units.
fn directional(r: &[f64], v: &[f64], t: f64, p: f64, eps: f64) -> (f64, f64) {
    let scale = r
        .iter()
        .zip(v)
        .fold(eps, |m, (ri, vi)| m.max((ri - t * vi).abs()));
    if scale == 0.0 {
        return (0.0, 0.0);
    }
    let e2 = (eps / scale).powi(2);
    let half = 0.5 * p - 2.0;
    let mut d1 = 0.0;
    let mut d2 = 0.0;
    for (&ri, &vi) in r.iter().zip(v) {
        let y = (ri - t * vi) / scale;
        let base = y * y + e2;
        if base == 0.0 {
            continue;
        }
        let vs = vi / scale;
        let pw = if half == 0.0 { 1.0 } else { base.powf(half) };
        d1 -= p * y * pw * base * vs;
        d2 += p * pw * ((p - 1.0) * y * y + e2) * vs * vs;
    }
    let step = if d2 > 0.0 { scale * d1 / d2 } else { f64::NAN };
    (d1, step)
}

/// Minimizes the convex function `t -> sum phi(r_i - t v_i)` over `t >= 0`
/// by a bracketed, safeguarded Newton iteration started at the plain IRLS
/// step `t = 1`.
fn line_search(r: &[f64], v: &[f64], p: f64, eps: f64) -> f64 {
    let mut lo = 0.0;
    let mut hi = f64::INFINITY;
    let mut t = 1.0;
    for _ in 0..60 {
        let (d, step) = directional(r, v, t, p, eps);
        if d == 0.0 {
            return t;
        }
        if d < 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let mut next = t - step;
        if !(next > lo && next < hi) {
            next = if hi.is_finite() {
                0.5 * (lo + hi)
            } else {
                2.0 * t
            };
        }
        if (next - t).abs() <= 1e-9 * t || hi - lo <= 1e-12 * hi {
            return next;
        }
        t = next;
    }
    t
}

/// `min_x ||U x - b||_p`.
pub fn solve_vector(
    u: &DenseMatrix,
    b: &[f64],
    cfg: &RegressionConfig,
) -> Result<RegressionSolution<Vec<f64>>, RegressionError> {
    LpSolver::new(u, *cfg)?.solve(b)
}

/// `min_Y ||A - U Y||_p`, solved column by column.
pub fn solve_matrix(
    u: &DenseMatrix,
    a: &DenseMatrix,
    cfg: &RegressionConfig,
) -> Result<RegressionSolution<DenseMatrix>, RegressionError> {
    solve_matrix_in(u, a, cfg, Exec::default())
}

pub fn solve_matrix_in(
    u: &DenseMatrix,
    a: &DenseMatrix,
    cfg: &RegressionConfig,
    exec: Exec,
) -> Result<RegressionSolution<DenseMatrix>, RegressionError> {
    if u.rows() != a.rows() {
        return Err(MatrixError::ShapeMismatch {
            op: "solve_matrix",
            left: u.shape(),
            right: a.shape(),
        }
        .into());
    }
    let solver = LpSolver::new(u, *cfg)?;
    let columns = a.columns();
    let sols = exec.map(&columns, |c| solver.solve(c));
    let sols = sols.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(assemble(u.cols(), cfg.p, sols, solver.rank_deficient()))
}

fn assemble(
    k: usize,
    p: PNorm,
    sols: Vec<RegressionSolution<Vec<f64>>>,
    rank_deficient: bool,
) -> RegressionSolution<DenseMatrix> {
    let m = sols.len();
    let objective = p.combine(&sols.iter().map(|s| s.objective).collect::<Vec<_>>());
    let lower_bound = sols
        .iter()
        .map(|s| s.lower_bound)
        .try_fold(0.0_f64, |acc, lb| lb.map(|v| acc.max(v)));
    RegressionSolution {
        coefficients: DenseMatrix::from_fn(k, m, |t, j| sols[j].coefficients[t]),
        objective,
        iterations: sols.iter().map(|s| s.iterations).sum(),
        converged: sols.iter().all(|s| s.converged),
        rank_deficient,
        lower_bound,
    }
}

/// Regression of every column of `A` onto the columns `A_J`. Columns that
/// belong to `J` are represented exactly by a unit coefficient vector and
/// are not handed to the iterative solver.
pub fn fit_subset(
    a: &DenseMatrix,
    subset: &ColumnSubset,
    cfg: &RegressionConfig,
    exec: Exec,
) -> Result<RegressionSolution<DenseMatrix>, RegressionError> {
    let basis = a.submatrix_columns(subset)?;
    let solver = LpSolver::new(&basis, *cfg)?;
    let k = subset.len();
    let sols = exec.map_range(a.cols(), |i| {
        if let Some(t) = subset.indices().iter().position(|&j| j == i) {
            let mut e = vec![0.0; k];
            e[t] = 1.0;
            Ok(RegressionSolution {
                coefficients: e,
                objective: 0.0,
                iterations: 0,
                converged: true,
                rank_deficient: false,
                lower_bound: cfg.p.is_infinite().then_some(0.0),
            })
        } else {
            solver.solve(&a.column(i))
        }
    });
    let sols = sols.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(assemble(k, cfg.p, sols, solver.rank_deficient()))
}

/// `Err(A_J) = min_Y ||A - A_J Y||_p`.
pub fn err_of_subset(
    a: &DenseMatrix,
    subset: &ColumnSubset,
    cfg: &RegressionConfig,
) -> Result<f64, RegressionError> {
    Ok(fit_subset(a, subset, cfg, Exec::Sequential)?.objective)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ones(n: usize) -> DenseMatrix {
        DenseMatrix::from_fn(n, 1, |_, _| 1.0)
    }

    #[test]
    fn mean_median_midrange() {
        let l2 = solve_vector(&ones(2), &[0.0, 2.0], &RegressionConfig::new(PNorm::TWO)).unwrap();
        assert!((l2.coefficients[0] - 1.0).abs() < 1e-12);
        assert!((l2.objective - 2f64.sqrt()).abs() < 1e-12);

        let l1 = solve_vector(
            &ones(3),
            &[0.0, 0.0, 3.0],
            &RegressionConfig::new(PNorm::ONE),
        )
        .unwrap();
        assert!(l1.coefficients[0].abs() < 1e-9, "{:?}", l1);
        assert!((l1.objective - 3.0).abs() < 1e-9);

        let li = solve_vector(
            &ones(2),
            &[0.0, 2.0],
            &RegressionConfig::new(PNorm::Infinity),
        )
        .unwrap();
        assert!((li.coefficients[0] - 1.0).abs() < 1e-9, "{:?}", li);
        assert!((li.objective - 1.0).abs() < 1e-9);
        assert!(li.lower_bound.unwrap() <= li.objective);
    }

    #[test]
    fn zero_rhs_is_exact() {
        let u = DenseMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0], [5.0, 7.0]]).unwrap();
        for p in [PNorm::ONE, PNorm::Finite(3.0), PNorm::Infinity] {
            let s = solve_vector(&u, &[0.0; 3], &RegressionConfig::new(p)).unwrap();
            assert_eq!(s.objective, 0.0);
        }
    }

    #[test]
    fn unreachable_coordinate() {
        let u = DenseMatrix::from_rows(&[[1.0], [0.0]]).unwrap();
        let a = DenseMatrix::identity(2);
        let s = solve_matrix(&u, &a, &RegressionConfig::new(PNorm::TWO)).unwrap();
        assert!((s.objective - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identity_subset_error_at_p1() {
        let a = DenseMatrix::identity(3);
        let j = ColumnSubset::proper(vec![0, 1], 3).unwrap();
        let e = err_of_subset(&a, &j, &RegressionConfig::new(PNorm::ONE)).unwrap();
        assert!((e - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rank_deficient_design_is_flagged() {
        let u = DenseMatrix::from_rows(&[[1.0, 2.0], [1.0, 2.0], [1.0, 2.0]]).unwrap();
        for p in [PNorm::ONE, PNorm::TWO, PNorm::Finite(3.0), PNorm::Infinity] {
            let s = solve_vector(&u, &[1.0, 2.0, 3.0], &RegressionConfig::new(p)).unwrap();
            assert!(s.rank_deficient);
            assert!(s.coefficients.iter().all(|c| c.is_finite()));
        }
    }

    #[test]
    fn config_validation() {
        let mut cfg = RegressionConfig::new(PNorm::ONE);
        cfg.smoothing_eps = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = RegressionConfig::new(PNorm::ONE);
        cfg.max_iters = 0;
        assert!(cfg.validate().is_err());
        assert!(RegressionConfig::new(PNorm::Finite(1.5)).validate().is_ok());
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let u = DenseMatrix::identity(3);
        assert!(matches!(
            solve_vector(&u, &[1.0, 2.0], &RegressionConfig::new(PNorm::TWO)),
            Err(RegressionError::Matrix(MatrixError::ShapeMismatch { .. }))
        ));
    }

    #[test]
    fn ladder_shapes() {
        assert_eq!(exponent_ladder(3.0), vec![3.0]);
        assert_eq!(exponent_ladder(8.0), vec![4.0, 8.0]);
        assert_eq!(exponent_ladder(LADDER_TOP).len(), 15);
    }
}
