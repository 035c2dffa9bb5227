//! `lpla`: entry-wise ℓp low-rank approximation from the command line.
//!
//! Exit codes: 0 on success, 1 when a run's check fails (or a report cannot
//! be written), 2 on bad usage or unreadable input.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use lpla::adversarial::{self, NoiseKind};
use lpla::bicriteria::{self, BicriteriaOptions};
use lpla::css::{self, RatioBound};
use lpla::io;
use lpla::rank_reduction;
use lpla::report::{self, ApproxReport, Reference, ReferenceKind};
use lpla::verification::{self, OracleConfig, TrialSummary};
use lpla::{DenseMatrix, Exec, PNorm, RegressionConfig};

#[derive(Parser)]
#[command(
    name = "lpla",
    version,
    about = "Entry-wise lp low-rank approximation by column subset selection"
)]
struct Cli {
    /// Add wall time (runtime_ms) to reports; reruns are then no longer
    /// byte-identical.
    #[arg(long, global = true)]
    timings: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact column subset selection over all k-subsets.
    Css(CssArgs),
    /// Randomized O(k log m) column selection with a guessed residual norm.
    Bicriteria(BicriteriaArgs),
    /// Reduce a factorization U V to rank k.
    Reduce(ReduceArgs),
    /// Bi-criteria selection followed by rank reduction.
    Pipeline(PipelineArgs),
    /// Randomized checks of the identities behind the approximation bound.
    Verify(VerifyArgs),
    /// Generate test matrices.
    #[command(subcommand)]
    Gen(GenCommand),
    /// Leave-one-out ratio on a perturbed Hadamard matrix.
    Lowerbound(LowerboundArgs),
}

#[derive(Args)]
struct Common {
    /// Input matrix (.mtx or .csv).
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    rank: usize,
    /// Norm exponent: a decimal >= 1 or "inf".
    #[arg(long)]
    p: PNorm,
    /// Write the JSON report here as well as to stdout.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct CssArgs {
    #[command(flatten)]
    common: Common,
    /// Relative tolerance on the ratio check.
    #[arg(long, default_value_t = 1e-2)]
    tol: f64,
    /// OPT reference (e.g. a planted noise norm); defaults to the
    /// alternating-minimization oracle.
    #[arg(long)]
    reference: Option<f64>,
    #[arg(long, value_enum, default_value_t = RefKind::Analytic)]
    reference_kind: RefKind,
    /// Seed of the oracle's random restarts.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Restarts of the oracle.
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    /// Largest number of subsets to enumerate.
    #[arg(long, default_value_t = css::DEFAULT_BUDGET)]
    budget: u64,
}

#[derive(Args)]
struct BicriteriaArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Coverage slack (>= 1).
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Optional OPT reference; the run then also checks
    /// error <= slack * c_{p,k} * reference.
    #[arg(long)]
    reference: Option<f64>,
    #[arg(long, value_enum, default_value_t = RefKind::Analytic)]
    reference_kind: RefKind,
    #[arg(long, default_value_t = 10.0)]
    slack: f64,
}

#[derive(Args)]
struct ReduceArgs {
    #[command(flatten)]
    common: Common,
    /// Left factor U (n x t).
    #[arg(long)]
    u: PathBuf,
    /// Right factor V (t x m).
    #[arg(long)]
    v: PathBuf,
}

#[derive(Args)]
struct PipelineArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Optional OPT reference; the run then also checks
    /// error <= slack * c_{p,k}^3 * k * log2(m) * reference.
    #[arg(long)]
    reference: Option<f64>,
    #[arg(long, value_enum, default_value_t = RefKind::Analytic)]
    reference_kind: RefKind,
    #[arg(long, default_value_t = 50.0)]
    slack: f64,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(value_enum)]
    check: CheckKind,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Pin the exponent (default: cycle through a fixed list).
    #[arg(long)]
    p: Option<PNorm>,
    /// Pin the rank (default: cycle).
    #[arg(long)]
    k: Option<usize>,
    /// Relative slack for lemma1 and for the bound side of weighted.
    #[arg(long)]
    slack: Option<f64>,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum CheckKind {
    Lambda,
    Lemma1,
    Schur,
    Weighted,
}

#[derive(Clone, Copy, ValueEnum)]
enum RefKind {
    Analytic,
    PlantedNoise,
    Oracle,
}

impl From<RefKind> for ReferenceKind {
    fn from(k: RefKind) -> Self {
        match k {
            RefKind::Analytic => ReferenceKind::Analytic,
            RefKind::PlantedNoise => ReferenceKind::PlantedNoise,
            RefKind::Oracle => ReferenceKind::Oracle,
        }
    }
}

#[derive(Subcommand)]
enum GenCommand {
    /// A Sylvester Hadamard matrix with its first row replaced by eps.
    Hadamard {
        #[arg(long)]
        r: u32,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value = "2")]
        p: PNorm,
        /// Output matrix (.mtx or .csv); without it the matrix goes to
        /// stdout in MatrixMarket form.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// A rank-k matrix plus seeded noise.
    Planted {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        rank: usize,
        #[arg(long, value_enum)]
        noise: NoiseArg,
        #[arg(long)]
        scale: f64,
        #[arg(long)]
        seed: u64,
        /// Fraction of nonzero entries for sparse noise.
        #[arg(long, default_value_t = 0.05)]
        density: f64,
        /// Exponent for the reported noise norm.
        #[arg(long, default_value = "2")]
        p: PNorm,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the low-rank part here.
        #[arg(long)]
        out_low_rank: Option<PathBuf>,
        /// Also write the noise here.
        #[arg(long)]
        out_noise: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum NoiseArg {
    Gaussian,
    Laplace,
    Sparse,
}

#[derive(Args)]
struct LowerboundArgs {
    #[arg(long)]
    r: u32,
    #[arg(long)]
    eps: f64,
    #[arg(long)]
    p: PNorm,
    #[arg(long)]
    report: Option<PathBuf>,
}

/// A failure and the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure {
        code: 2,
        message: e.to_string(),
    }
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure {
        code: 1,
        message: e.to_string(),
    }
}

type Outcome = Result<bool, Failure>;

fn main() -> ExitCode {
    if let Ok(v) = std::env::var("LPLA_THREADS") {
        match v.trim().parse::<usize>() {
            Ok(n) => {
                lpla::par::init_threads(n);
            }
            Err(_) => {
                eprintln!("error: LPLA_THREADS must be a non-negative integer, got {v:?}");
                return ExitCode::from(2);
            }
        }
    }
    let cli = Cli::parse();
    let timer = Timer {
        start: Instant::now(),
        enabled: cli.timings,
    };
    let result = match cli.command {
        Command::Css(args) => run_css(args, &timer),
        Command::Bicriteria(args) => run_bicriteria(args, &timer),
        Command::Reduce(args) => run_reduce(args, &timer),
        Command::Pipeline(args) => run_pipeline(args, &timer),
        Command::Verify(args) => run_verify(args),
        Command::Gen(cmd) => run_gen(cmd),
        Command::Lowerbound(args) => run_lowerbound(args, &timer),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

struct Timer {
    start: Instant,
    enabled: bool,
}

impl Timer {
    fn stamp(&self, report: &mut ApproxReport) {
        if self.enabled {
            report.runtime_ms = Some(self.start.elapsed().as_millis() as u64);
        }
    }
}

fn read(path: &Path) -> Result<DenseMatrix, Failure> {
    io::read_matrix(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn write(path: &Path, a: &DenseMatrix) -> Result<(), Failure> {
    io::write_matrix(path, a).map_err(|e| match e {
        io::IoError::UnsupportedExtension(_) => usage(e),
        _ => runtime(e),
    })
}

/// Prints the canonical JSON and writes it to `path` when given.
fn emit_json(value: &Value, path: Option<&Path>) -> Result<(), Failure> {
    let text = report::canonical_json(value);
    print!("{text}");
    if let Some(path) = path {
        std::fs::write(path, &text).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn emit(report: &ApproxReport, path: Option<&Path>) -> Result<bool, Failure> {
    emit_json(&report.to_json(), path)?;
    Ok(report.passed)
}

fn check_rank(a: &DenseMatrix, k: usize) -> Result<(), Failure> {
    let (n, m) = a.shape();
    if k == 0 || k > n.min(m) {
        return Err(usage(format!(
            "--rank {k} must satisfy 1 <= k <= min(n, m) = {}",
            n.min(m)
        )));
    }
    Ok(())
}

fn check_reference(value: Option<f64>) -> Result<(), Failure> {
    match value {
        Some(v) if !(v >= 0.0 && v.is_finite()) => {
            Err(usage(format!("--reference {v} must be >= 0")))
        }
        _ => Ok(()),
    }
}

fn run_css(args: CssArgs, timer: &Timer) -> Outcome {
    let c = &args.common;
    let a = read(&c.input)?;
    check_rank(&a, c.rank)?;
    check_reference(args.reference)?;
    let reg = RegressionConfig::new(c.p);
    let reference = match args.reference {
        Some(value) => Reference {
            kind: args.reference_kind.into(),
            value,
        },
        None => {
            let cfg = OracleConfig {
                restarts: args.restarts.max(1),
                seed: args.seed,
                ..OracleConfig::default()
            };
            let value = verification::opt_oracle(&a, c.rank, &cfg, &reg).map_err(runtime)?;
            let kind = if c.p == PNorm::TWO {
                ReferenceKind::Svd
            } else {
                ReferenceKind::Oracle
            };
            Reference { kind, value }
        }
    };
    let opts = css::CssOptions {
        budget: args.budget,
        ..Default::default()
    };
    let res = css::css_exact_with(&a, c.rank, &reg, opts).map_err(|e| match e {
        css::CssError::BudgetExceeded { .. } | css::CssError::InvalidRank { .. } => usage(e),
        _ => runtime(e),
    })?;
    let bound = RatioBound::new(c.p, c.rank).c_pk;
    let mut rep = ApproxReport::new("css", a.shape(), c.p);
    rep.k = Some(c.rank);
    rep.error = res.error;
    rep.reference = Some(reference);
    rep.bound = bound;
    rep.passed = res.error <= bound * reference.value * (1.0 + args.tol);
    rep.detail("subset", json!(res.best_subset.indices()))
        .detail("subsets_evaluated", json!(res.subsets_evaluated))
        .detail("converged", json!(res.converged));
    timer.stamp(&mut rep);
    emit(&rep, c.report.as_deref())
}

fn run_bicriteria(args: BicriteriaArgs, timer: &Timer) -> Outcome {
    let c = &args.common;
    let a = read(&c.input)?;
    check_rank(&a, c.rank)?;
    check_reference(args.reference)?;
    let reg = RegressionConfig::new(c.p);
    let opts = BicriteriaOptions {
        lambda: args.lambda,
        ..Default::default()
    };
    let res = match bicriteria::bicriteria_with_guessing(&a, c.rank, &reg, args.seed, opts) {
        Ok(res) => res,
        Err(bicriteria::BicriteriaError::AllGuessesFailed(records)) => {
            let mut rep = ApproxReport::new("bicriteria", a.shape(), c.p);
            rep.k = Some(c.rank);
            rep.seed = Some(args.seed);
            rep.error = f64::NAN;
            rep.passed = false;
            rep.detail(
                "guesses",
                Value::Array(records.iter().map(|g| g.to_json()).collect()),
            );
            timer.stamp(&mut rep);
            emit(&rep, c.report.as_deref())?;
            return Err(runtime(
                "every guess of the residual norm failed; try a larger --lambda",
            ));
        }
        Err(e @ bicriteria::BicriteriaError::InvalidConfig(_)) => return Err(usage(e)),
        Err(e) => return Err(runtime(e)),
    };
    let c_pk = RatioBound::new(c.p, c.rank).c_pk;
    let mut rep = ApproxReport::new("bicriteria", a.shape(), c.p);
    rep.k = Some(c.rank);
    rep.seed = Some(args.seed);
    rep.error = res.error;
    rep.bound = args.slack * c_pk;
    let within_cap = res.selected.len() <= bicriteria::column_cap(c.rank, a.cols());
    rep.passed = within_cap;
    if let Some(value) = args.reference {
        rep.reference = Some(Reference {
            kind: args.reference_kind.into(),
            value,
        });
        rep.passed &= res.error <= rep.bound * value;
    }
    rep.detail("selected", json!(res.selected.indices()))
        .detail("columns", json!(res.selected.len()))
        .detail("column_cap", json!(res.column_cap))
        .detail("levels", json!(res.levels))
        .detail("base_norm", report::float(res.base_norm))
        .detail(
            "guesses",
            Value::Array(res.guesses_tried.iter().map(|g| g.to_json()).collect()),
        );
    timer.stamp(&mut rep);
    emit(&rep, c.report.as_deref())
}

fn run_reduce(args: ReduceArgs, timer: &Timer) -> Outcome {
    let c = &args.common;
    let a = read(&c.input)?;
    let u = read(&args.u)?;
    let v = read(&args.v)?;
    let reg = RegressionConfig::new(c.p);
    let (fac, trace) =
        rank_reduction::reduce_rank(&a, &u, &v, c.rank, &reg).map_err(|e| match e {
            rank_reduction::RankReductionError::InvalidRank { .. }
            | rank_reduction::RankReductionError::Regression(lpla::RegressionError::Matrix(_)) => {
                usage(e)
            }
            _ => runtime(e),
        })?;
    let input_error = a
        .sub(&u.matmul(&v).map_err(usage)?)
        .map_err(usage)?
        .entrywise_norm(c.p);
    let mut rep = ApproxReport::new("reduce", a.shape(), c.p);
    rep.k = Some(c.rank);
    rep.error = fac.error;
    rep.bound = pipeline_bound(c.p, c.rank, a.cols());
    rep.detail("input_error", report::float(input_error))
        .detail("basis_rank", json!(trace.basis_rank))
        .detail(
            "certificate",
            json!(trace
                .certificate
                .map(|(lo, hi)| vec![report::float(lo), report::float(hi)])),
        )
        .detail("kept_rows", json!(trace.kept_rows));
    timer.stamp(&mut rep);
    emit(&rep, c.report.as_deref())
}

/// `c_{p,k}^3 * k * log2(m)`.
fn pipeline_bound(p: PNorm, k: usize, m: usize) -> f64 {
    RatioBound::new(p, k).c_pk.powi(3) * k as f64 * (m as f64).log2().max(1.0)
}

fn run_pipeline(args: PipelineArgs, timer: &Timer) -> Outcome {
    let c = &args.common;
    let a = read(&c.input)?;
    check_rank(&a, c.rank)?;
    check_reference(args.reference)?;
    let reg = RegressionConfig::new(c.p);
    let opts = BicriteriaOptions {
        lambda: args.lambda,
        ..Default::default()
    };
    let res = rank_reduction::full_pipeline(&a, c.rank, &reg, args.seed, opts).map_err(runtime)?;
    let mut rep = ApproxReport::new("pipeline", a.shape(), c.p);
    rep.k = Some(c.rank);
    rep.seed = Some(args.seed);
    rep.error = res.factorization.error;
    rep.bound = args.slack * pipeline_bound(c.p, c.rank, a.cols());
    if let Some(value) = args.reference {
        rep.reference = Some(Reference {
            kind: args.reference_kind.into(),
            value,
        });
        rep.passed = rep.error <= rep.bound * value;
    }
    rep.detail("provenance", res.provenance_json());
    timer.stamp(&mut rep);
    emit(&rep, c.report.as_deref())
}

fn run_verify(args: VerifyArgs) -> Outcome {
    let exec = Exec::default();
    if args.k == Some(0) {
        return Err(usage("--k must be positive"));
    }
    let (summary, extra) = match args.check {
        CheckKind::Lambda => {
            let ps: Vec<PNorm> = match args.p {
                Some(p) => vec![p],
                None => LAMBDA_PS.to_vec(),
            };
            let ks: Vec<usize> = match args.k {
                Some(k) => vec![k],
                None => vec![1, 2, 3],
            };
            let m_max = ks.iter().max().copied().unwrap_or(1).max(6) + 1;
            let cells =
                verification::run_lambda_grid(&ps, &ks, m_max, args.trials, args.seed, exec);
            let mut total = TrialSummary {
                check: "lambda".into(),
                trials: 0,
                passed: 0,
                failed: 0,
                skipped: 0,
                max_ratio: 0.0,
            };
            let mut rows = Vec::new();
            for cell in &cells {
                total.merge(&cell.summary);
                let mut row = cell.summary.to_json();
                row["p"] = report::pnorm_json(cell.p);
                row["k"] = json!(cell.k);
                row["m"] = json!(cell.m);
                rows.push(row);
            }
            (total, Some(Value::Array(rows)))
        }
        CheckKind::Lemma1 => {
            let slack = args.slack.unwrap_or(verification::IDENTITY_SLACK);
            let s = verification::run_lemma1_trials(
                args.trials,
                args.seed,
                args.p,
                args.k,
                slack,
                exec,
            )
            .map_err(usage)?;
            (s, None)
        }
        CheckKind::Schur => {
            let s = verification::run_schur_trials(args.trials, args.seed, args.k, exec)
                .map_err(usage)?;
            (s, None)
        }
        CheckKind::Weighted => {
            let slack = args.slack.unwrap_or(1e-2);
            let s = verification::run_weighted_trials(
                args.trials,
                args.seed,
                args.p,
                args.k,
                slack,
                exec,
            )
            .map_err(usage)?;
            (s, None)
        }
    };
    let mut out = summary.to_json();
    out["seed"] = json!(args.seed);
    if let Some(cells) = extra {
        out["cells"] = cells;
    }
    emit_json(&out, args.report.as_deref())?;
    Ok(summary.all_passed())
}

const LAMBDA_PS: [PNorm; 7] = [
    PNorm::ONE,
    PNorm::Finite(1.25),
    PNorm::Finite(1.5),
    PNorm::TWO,
    PNorm::Finite(3.0),
    PNorm::Finite(4.0),
    PNorm::Infinity,
];

fn run_gen(cmd: GenCommand) -> Outcome {
    match cmd {
        GenCommand::Hadamard { r, eps, p, out } => {
            let inst = adversarial::hadamard_instance(r, eps, p).map_err(usage)?;
            match out {
                Some(path) => {
                    write(&path, &inst.a)?;
                    let summary = json!({
                        "r": r,
                        "k": inst.k,
                        "eps": report::float(eps),
                        "p": report::pnorm_json(p),
                        "opt_upper": report::float(inst.opt_upper),
                        "lb_formula": report::float(inst.lb_formula),
                    });
                    emit_json(&summary, None)?;
                }
                None => print!("{}", io::to_matrix_market(&inst.a)),
            }
            Ok(true)
        }
        GenCommand::Planted {
            n,
            m,
            rank,
            noise,
            scale,
            seed,
            density,
            p,
            out,
            out_low_rank,
            out_noise,
        } => {
            let kind = match noise {
                NoiseArg::Gaussian => NoiseKind::Gaussian,
                NoiseArg::Laplace => NoiseKind::Laplace,
                NoiseArg::Sparse => NoiseKind::SparseSpikes { density },
            };
            let inst =
                adversarial::planted_instance(n, m, rank, p, kind, scale, seed).map_err(usage)?;
            if let Some(path) = &out_low_rank {
                write(path, &inst.l)?;
            }
            if let Some(path) = &out_noise {
                write(path, &inst.e)?;
            }
            match out {
                Some(path) => {
                    write(&path, &inst.a)?;
                    let summary = json!({
                        "shape": [n, m],
                        "k": rank,
                        "seed": seed,
                        "p": report::pnorm_json(p),
                        "noise_norm": report::float(inst.noise_norm),
                    });
                    emit_json(&summary, None)?;
                }
                None => print!("{}", io::to_matrix_market(&inst.a)),
            }
            Ok(true)
        }
    }
}

fn run_lowerbound(args: LowerboundArgs, timer: &Timer) -> Outcome {
    let inst = adversarial::hadamard_instance(args.r, args.eps, args.p).map_err(usage)?;
    let m =
        adversarial::measure_lower_bound(&inst, &RegressionConfig::new(args.p)).map_err(runtime)?;
    let mut rep = m.to_report(&inst);
    timer.stamp(&mut rep);
    emit(&rep, args.report.as_deref())
}
