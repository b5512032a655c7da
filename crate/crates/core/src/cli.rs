//! Command-line front end. Exit codes: 0 success, 2 usage or I/O error,
//! 3 outer iteration cap reached, 4 degenerate iterate.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{
    relative_error, run_experiment, spectrum_check, verify_suite, write_experiment, CheckResult, ExperimentSpec,
    VerifyCheck,
};
use crate::linalg::{read_matrix_csv, read_vector_csv, tau2, write_matrix_csv, write_vector_csv};
use crate::reform::{export_qp, QpMode};
use crate::sensing::{
    gen_matrix, gen_signal, synthesize_measurements, Augmentation, MagnitudeModel, MatrixFamily, MatrixSpec,
    NoiseSpec, SignalSpec,
};
use crate::solver::{dinkelbach_solve, l1_initializer, noisy_initial_point, RecoveryProblem, SolverConfig, Status};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_MAX_ITER: i32 = 3;
pub const EXIT_DEGENERATE: i32 = 4;

#[derive(Parser, Debug)]
#[command(name = "tau2", version, about = "Sparse recovery by minimizing the squared l1/l2 ratio")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a sensing matrix, sparse signal and measurements
    Gen(GenArgs),
    /// Recover a signal from A.csv and b.csv
    Solve(SolveArgs),
    /// Run a seeded sweep described by a JSON spec
    Experiment(ExperimentArgs),
    /// Run the built-in verification suite
    Verify(VerifyArgs),
    /// Write the QP reformulation at a given ratio as JSON
    ExportQp(ExportArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum FamilyArg {
    Dct,
    Gaussian,
    RankDeficient,
}

impl From<FamilyArg> for MatrixFamily {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Dct => MatrixFamily::OversampledDct,
            FamilyArg::Gaussian => MatrixFamily::CorrelatedGaussian,
            FamilyArg::RankDeficient => MatrixFamily::RankDeficientDct,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModeArg {
    Copy,
    Combine,
}

#[derive(Args, Debug)]
pub struct GenArgs {
    #[arg(long, value_enum, default_value = "dct")]
    pub family: FamilyArg,
    #[arg(long, default_value_t = 64)]
    pub m: usize,
    #[arg(long, default_value_t = 1024)]
    pub n: usize,
    /// coherence parameter of DCT matrices
    #[arg(long = "E", default_value_t = 1.0)]
    pub coherence: f64,
    /// correlation of Gaussian matrices
    #[arg(long = "r", default_value_t = 0.0)]
    pub correlation: f64,
    #[arg(long, default_value_t = 5)]
    pub extra_rows: usize,
    #[arg(long, value_enum, default_value = "copy")]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 5)]
    pub s: usize,
    /// dynamic-range exponent; omit for unit Gaussian magnitudes
    #[arg(long = "D")]
    pub dynamic_range: Option<f64>,
    /// minimum support separation; defaults to ⌈2E⌉ for DCT matrices, 1 otherwise
    #[arg(long)]
    pub sep: Option<usize>,
    #[arg(long, default_value_t = 0.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 1.2)]
    pub eps_factor: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct SolverFlags {
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub inner_tol: Option<f64>,
    #[arg(long)]
    pub outer_tol: Option<f64>,
    #[arg(long)]
    pub max_outer: Option<usize>,
    #[arg(long)]
    pub max_inner: Option<usize>,
}

impl SolverFlags {
    fn apply(&self, mut c: SolverConfig) -> SolverConfig {
        if let Some(v) = self.rho {
            c.rho = v;
            if self.beta.is_none() {
                c.beta = c.beta.max(v);
            }
        }
        if let Some(v) = self.beta {
            c.beta = v;
        }
        if let Some(v) = self.inner_tol {
            c.inner_tol = v;
        }
        if let Some(v) = self.outer_tol {
            c.outer_tol = v;
        }
        if self.max_outer.is_some() {
            c.outer_max_iter = self.max_outer;
        }
        if let Some(v) = self.max_inner {
            c.inner_max_iter = v;
        }
        c
    }
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    /// directory holding A.csv, b.csv and optionally meta.json / x_true.csv
    #[arg(long, default_value = ".")]
    pub dir: PathBuf,
    /// noise budget; defaults to meta.json's value, else 0
    #[arg(long)]
    pub eps: Option<f64>,
    /// starting point instead of the l1 initializer
    #[arg(long)]
    pub x0: Option<PathBuf>,
    /// matrix family used to pick solver defaults
    #[arg(long, value_enum)]
    pub family: Option<FamilyArg>,
    #[command(flatten)]
    pub solver: SolverFlags,
    /// output directory; defaults to --dir
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub base_seed: Option<u64>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum CheckArg {
    All,
    Spectrum,
    Examples,
    Prox,
    Lipschitz,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[arg(long, value_enum, default_value = "all")]
    pub check: CheckArg,
    /// with `--check spectrum`: a single size instead of the sweep
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum QpModeArg {
    Exact,
    Linearized,
}

#[derive(Args, Debug)]
pub struct ExportArgs {
    #[arg(long, default_value = ".")]
    pub dir: PathBuf,
    #[arg(long)]
    pub eps: Option<f64>,
    /// ratio α; defaults to τ₂ of the anchor
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, value_enum, default_value = "exact")]
    pub mode: QpModeArg,
    /// anchor vector c; defaults to x_hat.csv, then the least-norm solution
    #[arg(long)]
    pub c: Option<PathBuf>,
    /// write the 2n × 2n objective matrix explicitly
    #[arg(long)]
    pub dense: bool,
    #[arg(long, default_value = "qp.json")]
    pub out: PathBuf,
}

/// Contents of `meta.json` written by `gen`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GenMeta {
    pub matrix: MatrixSpec,
    pub signal: SignalSpec,
    pub noise: NoiseSpec,
    pub seed: u64,
    pub eps: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: Status,
    pub alpha_final: f64,
    pub alpha_trace: Vec<f64>,
    pub dinkelbach_trace: Vec<f64>,
    pub outer_iters: usize,
    pub inner_iters_total: usize,
    pub feasibility_residual: f64,
    pub eps: f64,
    pub initial_point: String,
    pub relative_error: Option<f64>,
    pub config: SolverConfig,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

fn dispatch(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Gen(a) => cmd_gen(&a).map(|_| EXIT_OK),
        Command::Solve(a) => cmd_solve(&a),
        Command::Experiment(a) => cmd_experiment(&a).map(|_| EXIT_OK),
        Command::Verify(a) => cmd_verify(&a),
        Command::ExportQp(a) => cmd_export(&a).map(|_| EXIT_OK),
    }
}

pub fn cmd_gen(args: &GenArgs) -> Result<GenMeta> {
    let family: MatrixFamily = args.family.into();
    let matrix = MatrixSpec {
        family,
        m: args.m,
        n: args.n,
        coherence: args.coherence,
        correlation: args.correlation,
        extra_rows: if family == MatrixFamily::RankDeficientDct { args.extra_rows } else { 0 },
        augmentation: match args.mode {
            ModeArg::Copy => Augmentation::Copy,
            ModeArg::Combine => Augmentation::Combine,
        },
        seed: args.seed,
    };
    let signal = SignalSpec {
        n: args.n,
        s: args.s,
        magnitude: match args.dynamic_range {
            Some(d) => MagnitudeModel::DynamicRange { d },
            None => MagnitudeModel::UnitGaussian,
        },
        min_separation: args.sep.unwrap_or_else(|| matrix.default_min_separation()),
        seed: args.seed,
    };
    let noise = NoiseSpec {
        sigma: args.sigma,
        eps_factor: args.eps_factor,
    };
    let a = gen_matrix(&matrix)?;
    let x = gen_signal(&signal)?;
    let (b, eps) = synthesize_measurements(&a, &x, &noise, args.seed)?;
    std::fs::create_dir_all(&args.out)?;
    write_matrix_csv(args.out.join("A.csv"), &a)?;
    write_vector_csv(args.out.join("x_true.csv"), &x)?;
    write_vector_csv(args.out.join("b.csv"), &b)?;
    let meta = GenMeta {
        matrix,
        signal,
        noise,
        seed: args.seed,
        eps,
    };
    std::fs::write(args.out.join("meta.json"), serde_json::to_string_pretty(&meta)?)?;
    Ok(meta)
}

fn read_meta(dir: &Path) -> Option<GenMeta> {
    let text = std::fs::read_to_string(dir.join("meta.json")).ok()?;
    serde_json::from_str(&text).ok()
}

fn load_problem(dir: &Path, eps: Option<f64>) -> Result<(RecoveryProblem, Option<GenMeta>)> {
    let a = read_matrix_csv(dir.join("A.csv"))?;
    let b = read_vector_csv(dir.join("b.csv"))?;
    let meta = read_meta(dir);
    let eps = eps.or(meta.as_ref().map(|m| m.eps)).unwrap_or(0.0);
    Ok((RecoveryProblem::new(a, b, eps)?, meta))
}

pub fn cmd_solve(args: &SolveArgs) -> Result<i32> {
    let (problem, meta) = load_problem(&args.dir, args.eps)?;
    let family = args
        .family
        .map(MatrixFamily::from)
        .or(meta.as_ref().map(|m| m.matrix.family))
        .unwrap_or(MatrixFamily::OversampledDct);
    let config = args.solver.apply(SolverConfig::for_family(family, problem.eps() > 0.0));
    config.validate()?;

    let (x0, origin) = match &args.x0 {
        Some(p) => (read_vector_csv(p)?, format!("file {}", p.display())),
        None => {
            let x_l1 = l1_initializer(&problem, 1e-8, 2 * config.inner_max_iter.max(1))?;
            if problem.eps() > 0.0 {
                (noisy_initial_point(&problem, &x_l1)?, "l1 (projected)".to_string())
            } else {
                (x_l1, "l1".to_string())
            }
        }
    };
    let result = dinkelbach_solve(&problem, &x0, &config)?;

    let out = args.out.clone().unwrap_or_else(|| args.dir.clone());
    std::fs::create_dir_all(&out)?;
    write_vector_csv(out.join("x_hat.csv"), &result.x)?;
    let truth = read_vector_csv(args.dir.join("x_true.csv")).ok();
    let report = SolveReport {
        status: result.status,
        alpha_final: result.alpha_final(),
        alpha_trace: result.alpha_trace.clone(),
        dinkelbach_trace: result.dinkelbach_trace.clone(),
        outer_iters: result.outer_iters,
        inner_iters_total: result.inner_iters_total,
        feasibility_residual: result.feasibility_residual,
        eps: problem.eps(),
        initial_point: origin,
        relative_error: truth.and_then(|t| relative_error(&result.x, &t).ok()),
        config,
    };
    std::fs::write(out.join("report.json"), serde_json::to_string_pretty(&report)?)?;
    println!(
        "status {:?}, alpha {:.10}, outer {}, inner {}, residual {:.3e}",
        report.status, report.alpha_final, report.outer_iters, report.inner_iters_total, report.feasibility_residual
    );
    Ok(match result.status {
        Status::Converged => EXIT_OK,
        Status::MaxIter => EXIT_MAX_ITER,
        Status::Degenerate => EXIT_DEGENERATE,
    })
}

pub fn cmd_experiment(args: &ExperimentArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.spec)?;
    let mut spec: ExperimentSpec = serde_json::from_str(&text)?;
    if let Some(t) = args.trials {
        spec.trials = t;
    }
    if let Some(s) = args.base_seed {
        spec.base_seed = s;
    }
    if let Some(t) = args.threshold {
        spec.success_threshold = t;
    }
    spec.validate()?;
    let out = args
        .out
        .clone()
        .or(spec.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    let records = run_experiment(&spec)?;
    let summary = write_experiment(&out, &spec, &records)?;
    for c in &summary.cells {
        println!(
            "s={:<4} success {} ({}/{})  mean rel. error {:.3e}  mean time {:.4}s",
            c.s, c.success_rate, c.successes, c.trials, c.mean_relative_error, c.mean_wall_seconds
        );
    }
    Ok(())
}

fn print_checks(checks: &[CheckResult]) -> bool {
    let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
    for c in checks {
        println!(
            "{} {:<width$}  {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    checks.iter().all(|c| c.passed)
}

pub fn cmd_verify(args: &VerifyArgs) -> Result<i32> {
    let checks = match (args.check, args.n) {
        (CheckArg::Spectrum, Some(n)) => {
            let alpha = args.alpha.unwrap_or(1.0);
            let report = crate::reform::verify_h_spectrum(n, alpha)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            vec![spectrum_check(n, alpha)]
        }
        (c, _) => verify_suite(match c {
            CheckArg::All => VerifyCheck::All,
            CheckArg::Spectrum => VerifyCheck::Spectrum,
            CheckArg::Examples => VerifyCheck::Examples,
            CheckArg::Prox => VerifyCheck::Prox,
            CheckArg::Lipschitz => VerifyCheck::Lipschitz,
        }),
    };
    Ok(if print_checks(&checks) { EXIT_OK } else { 1 })
}

pub fn cmd_export(args: &ExportArgs) -> Result<()> {
    let (problem, _) = load_problem(&args.dir, args.eps)?;
    let anchor = match &args.c {
        Some(p) => read_vector_csv(p)?,
        None => match read_vector_csv(args.dir.join("x_hat.csv")) {
            Ok(x) => x,
            Err(_) => problem.least_norm_point()?,
        },
    };
    if anchor.len() != problem.n() {
        return Err(Error::Dimension(format!(
            "anchor has length {}, expected {}",
            anchor.len(),
            problem.n()
        )));
    }
    let alpha = match args.alpha {
        Some(a) => a,
        None => tau2(&anchor)?,
    };
    let mode = match args.mode {
        QpModeArg::Exact => QpMode::ExactIndefinite,
        QpModeArg::Linearized => QpMode::LinearizedConvex,
    };
    let mut qp = export_qp(&problem, alpha, mode, Some(&anchor))?;
    if args.dense {
        qp.densify();
    }
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(&args.out, qp.to_json()?)?;
    println!("wrote {} (alpha {alpha})", args.out.display());
    Ok(())
}
