//! Seeded experiment sweeps, trial records, and the built-in verification
//! suite.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{norm_l2, phi_map, sub, DenseMatrix};
use crate::prox::prox_sq_l1;
use crate::reform::{alpha_bar_exact, alpha_star_exact, eval_f_bruteforce, kernel_model, verify_h_spectrum};
use crate::sensing::{
    gen_matrix, gen_signal, stream_rng, synthesize_measurements, MagnitudeModel, MatrixSpec, NoiseSpec, SignalSpec,
    Stream,
};
use crate::solver::{recover, RecoveryProblem, SolverConfig, SolverResult, Status};

pub const EXPERIMENT_SCHEMA: &str = "tau2-exp/1";

/// Signal templates swept by an experiment: one grid cell per sparsity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignalGrid {
    pub s: Vec<usize>,
    pub magnitude: MagnitudeModel,
    /// defaults to the matrix family's separation (`⌈2E⌉` for DCT matrices)
    #[serde(default)]
    pub min_separation: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    #[serde(default = "schema_tag")]
    pub schema: String,
    pub matrix: MatrixSpec,
    pub signal: SignalGrid,
    #[serde(default)]
    pub noise: NoiseSpec,
    /// defaults to [`SolverConfig::for_family`]
    #[serde(default)]
    pub solver: Option<SolverConfig>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_threshold")]
    pub success_threshold: f64,
    #[serde(default)]
    pub output: Option<String>,
}

fn schema_tag() -> String {
    EXPERIMENT_SCHEMA.to_string()
}

fn default_trials() -> usize {
    50
}

fn default_threshold() -> f64 {
    1e-3
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ExperimentSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != EXPERIMENT_SCHEMA {
            return Err(Error::Parse(format!("unsupported schema {:?}", self.schema)));
        }
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials must be >= 1".into()));
        }
        if !(self.success_threshold > 0.0) {
            return Err(Error::InvalidArgument("success_threshold must be > 0".into()));
        }
        if self.signal.s.is_empty() {
            return Err(Error::InvalidArgument("signal grid has no sparsity levels".into()));
        }
        self.noise.validate()?;
        self.solver_config().validate()
    }

    pub fn solver_config(&self) -> SolverConfig {
        self.solver
            .clone()
            .unwrap_or_else(|| SolverConfig::for_family(self.matrix.family, self.noise.sigma > 0.0))
    }

    pub fn signal_spec(&self, s: usize, seed: u64) -> SignalSpec {
        SignalSpec {
            n: self.matrix.n,
            s,
            magnitude: self.signal.magnitude,
            min_separation: self
                .signal
                .min_separation
                .unwrap_or_else(|| self.matrix.default_min_separation()),
            seed,
        }
    }
}

/// One generated recovery instance.
#[derive(Clone, Debug)]
pub struct Instance {
    pub a: DenseMatrix,
    pub x_true: Vec<f64>,
    pub b: Vec<f64>,
    pub eps: f64,
}

/// Matrix, signal and noise for `seed`, each drawn from its own stream.
pub fn generate_instance(matrix: &MatrixSpec, signal: &SignalSpec, noise: &NoiseSpec, seed: u64) -> Result<Instance> {
    let a = gen_matrix(&matrix.with_seed(seed))?;
    let x_true = gen_signal(&SignalSpec {
        seed,
        ..signal.clone()
    })?;
    let (b, eps) = synthesize_measurements(&a, &x_true, noise, seed)?;
    Ok(Instance { a, x_true, b, eps })
}

/// `‖x̂ − x‖₂ / ‖x‖₂`
pub fn relative_error(x_hat: &[f64], x_true: &[f64]) -> Result<f64> {
    if x_hat.len() != x_true.len() {
        return Err(Error::Dimension(format!(
            "estimate has length {}, truth has {}",
            x_hat.len(),
            x_true.len()
        )));
    }
    let t = norm_l2(x_true);
    if t == 0.0 {
        return Err(Error::ZeroVector("reference signal"));
    }
    Ok(norm_l2(&sub(x_hat, x_true)) / t)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub s: usize,
    pub relative_error: f64,
    pub success: bool,
    pub outer_iters: usize,
    pub inner_iters: usize,
    pub wall_seconds: f64,
    pub alpha_final: f64,
    /// solver status, or `error` when the trial could not run
    pub status: String,
}

/// A trial together with the full solver output.
#[derive(Clone, Debug)]
pub struct TrialOutcome {
    pub record: TrialRecord,
    pub instance: Option<Instance>,
    pub result: Option<SolverResult>,
}

fn status_name(s: Status) -> &'static str {
    match s {
        Status::Converged => "converged",
        Status::MaxIter => "max-iter",
        Status::Degenerate => "degenerate",
    }
}

/// Runs trial `trial` of the cell with sparsity `s`; failures are recorded,
/// not returned.
pub fn run_trial(spec: &ExperimentSpec, s: usize, trial: usize) -> TrialOutcome {
    let seed = spec.base_seed.wrapping_add(trial as u64);
    let mut record = TrialRecord {
        trial,
        seed,
        s,
        relative_error: f64::NAN,
        success: false,
        outer_iters: 0,
        inner_iters: 0,
        wall_seconds: 0.0,
        alpha_final: f64::NAN,
        status: "error".to_string(),
    };
    let instance = match generate_instance(&spec.matrix, &spec.signal_spec(s, seed), &spec.noise, seed) {
        Ok(i) => i,
        Err(_) => {
            return TrialOutcome {
                record,
                instance: None,
                result: None,
            }
        }
    };
    let start = Instant::now();
    let solved = RecoveryProblem::new(instance.a.clone(), instance.b.clone(), instance.eps)
        .and_then(|p| recover(&p, &spec.solver_config()));
    record.wall_seconds = start.elapsed().as_secs_f64();
    let result = match solved {
        Ok(r) => r,
        Err(_) => {
            return TrialOutcome {
                record,
                instance: Some(instance),
                result: None,
            }
        }
    };
    record.relative_error = relative_error(&result.x, &instance.x_true).unwrap_or(f64::NAN);
    record.success = record.relative_error < spec.success_threshold;
    record.outer_iters = result.outer_iters;
    record.inner_iters = result.inner_iters_total;
    record.alpha_final = result.alpha_final();
    record.status = status_name(result.status).to_string();
    TrialOutcome {
        record,
        instance: Some(instance),
        result: Some(result),
    }
}

/// All `(s, trial)` pairs of the sweep, run in parallel, returned in grid order.
pub fn run_experiment_detailed(spec: &ExperimentSpec) -> Result<Vec<TrialOutcome>> {
    spec.validate()?;
    let jobs: Vec<(usize, usize)> = spec
        .signal
        .s
        .iter()
        .flat_map(|&s| (0..spec.trials).map(move |t| (s, t)))
        .collect();
    Ok(jobs.par_iter().map(|&(s, t)| run_trial(spec, s, t)).collect())
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<TrialRecord>> {
    Ok(run_experiment_detailed(spec)?.into_iter().map(|o| o.record).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub s: usize,
    pub trials: usize,
    pub successes: usize,
    /// `successes / trials` with six decimals
    pub success_rate: String,
    /// over trials that produced an estimate
    pub mean_relative_error: f64,
    pub mean_wall_seconds: f64,
    pub failed_trials: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub schema: String,
    pub success_threshold: f64,
    pub cells: Vec<CellSummary>,
}

pub fn summarize(spec: &ExperimentSpec, records: &[TrialRecord]) -> ExperimentSummary {
    let cells = spec
        .signal
        .s
        .iter()
        .map(|&s| {
            let rows: Vec<&TrialRecord> = records.iter().filter(|r| r.s == s).collect();
            let ok: Vec<&&TrialRecord> = rows.iter().filter(|r| r.relative_error.is_finite()).collect();
            let successes = rows.iter().filter(|r| r.success).count();
            let mean = |f: &dyn Fn(&TrialRecord) -> f64, v: &[&&TrialRecord]| {
                if v.is_empty() {
                    f64::NAN
                } else {
                    v.iter().map(|r| f(r)).sum::<f64>() / v.len() as f64
                }
            };
            CellSummary {
                s,
                trials: rows.len(),
                successes,
                success_rate: format!("{:.6}", successes as f64 / rows.len().max(1) as f64),
                mean_relative_error: mean(&|r| r.relative_error, &ok),
                mean_wall_seconds: mean(&|r| r.wall_seconds, &ok),
                failed_trials: rows.len() - ok.len(),
            }
        })
        .collect();
    ExperimentSummary {
        schema: EXPERIMENT_SCHEMA.to_string(),
        success_threshold: spec.success_threshold,
        cells,
    }
}

pub const RESULTS_HEADER: &str =
    "trial,seed,s,relative_error,success,outer_iters,inner_iters,wall_seconds,alpha_final,status";

/// One CSV line per record, wall time with four decimals.
pub fn results_csv(records: &[TrialRecord]) -> String {
    let mut out = String::from(RESULTS_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{:?},{},{},{},{:.4},{:?},{}\n",
            r.trial,
            r.seed,
            r.s,
            r.relative_error,
            u8::from(r.success),
            r.outer_iters,
            r.inner_iters,
            r.wall_seconds,
            r.alpha_final,
            r.status
        ));
    }
    out
}

/// Writes `results.csv` and `summary.json` into `dir`.
pub fn write_experiment(dir: &Path, spec: &ExperimentSpec, records: &[TrialRecord]) -> Result<ExperimentSummary> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("results.csv"), results_csv(records))?;
    let summary = summarize(spec, records);
    std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    Ok(summary)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VerifyCheck {
    All,
    Spectrum,
    Examples,
    Prox,
    Lipschitz,
}

pub fn example1_system() -> (DenseMatrix, Vec<f64>) {
    let a = DenseMatrix::from_rows(&[
        [1.0, -1.0, 0.0, 0.0, 0.0, 0.0],
        [1.0, 0.0, -1.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 1.0, 1.0, 0.0, 0.0],
        [2.0, 2.0, 0.0, 0.0, 1.0, 0.0],
        [1.0, 1.0, 0.0, 0.0, 0.0, -1.0],
    ])
    .expect("static matrix");
    (a, vec![0.0, 0.0, 20.0, 40.0, 18.0])
}

/// The first example with its second equation removed, leaving a plane of solutions.
pub fn example2_system() -> (DenseMatrix, Vec<f64>) {
    let a = DenseMatrix::from_rows(&[
        [1.0, -1.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 1.0, 1.0, 0.0, 0.0],
        [2.0, 2.0, 0.0, 0.0, 1.0, 0.0],
        [1.0, 1.0, 0.0, 0.0, 0.0, -1.0],
    ])
    .expect("static matrix");
    (a, vec![0.0, 20.0, 40.0, 18.0])
}

pub fn spectrum_check(n: usize, alpha: f64) -> CheckResult {
    match verify_h_spectrum(n, alpha) {
        Ok(r) => CheckResult::new(
            format!("spectrum n={n} alpha={alpha}"),
            r.passed,
            format!(
                "max eigenvalue error {:.2e}, reconstruction error {:.2e} (transposed reading {:.2e}), deviating {:?}",
                r.max_eigenvalue_error, r.reconstruction_error_columns, r.reconstruction_error_rows, r.deviating
            ),
        ),
        Err(e) => CheckResult::new(format!("spectrum n={n} alpha={alpha}"), false, e.to_string()),
    }
}

fn example_checks() -> Vec<CheckResult> {
    let mut out = Vec::new();
    let close = |name: &str, got: Result<f64>, want: f64, tol: f64| match got {
        Ok(v) => CheckResult::new(name, (v - want).abs() <= tol, format!("{v:.12} (expected {want:.12})")),
        Err(e) => CheckResult::new(name, false, e.to_string()),
    };
    let (a1, b1) = example1_system();
    let (a2, b2) = example2_system();
    match (kernel_model(&a1, &b1), kernel_model(&a2, &b2)) {
        (Ok(m1), Ok(m2)) => {
            out.push(close("example 1 alpha*", alpha_star_exact(&m1), 121.0 / 27.0, 1e-9));
            let bar1 = alpha_bar_exact(&m1);
            out.push(close("example 1 alpha-bar", bar1.as_ref().map(|b| b.value).map_err(clone_err), 1521.0 / 581.0, 1e-6));
            out.push(CheckResult::new(
                "example 1 alpha-bar attained",
                bar1.map(|b| b.attained).unwrap_or(false),
                "",
            ));
            let f1 = eval_f_bruteforce(&m1, 121.0 / 27.0, 1000);
            out.push(CheckResult::new(
                "example 1 F(alpha*) unbounded",
                f1.map(|f| f.unbounded).unwrap_or(false),
                "",
            ));
            let star2 = alpha_star_exact(&m2);
            out.push(close("example 2 alpha*", star2.as_ref().copied().map_err(clone_err), 2.0, 1e-6));
            let bar2 = alpha_bar_exact(&m2);
            out.push(close("example 2 alpha-bar", bar2.as_ref().map(|b| b.value).map_err(clone_err), 2.0, 1e-4));
            out.push(CheckResult::new(
                "example 2 alpha-bar only in the limit",
                bar2.map(|b| !b.attained).unwrap_or(false),
                "",
            ));
            let f2 = star2.and_then(|s| eval_f_bruteforce(&m2, s, 10_000));
            out.push(match f2 {
                Ok(f) => CheckResult::new("example 2 F(alpha*) finite", !f.unbounded, format!("{}", f.value)),
                Err(e) => CheckResult::new("example 2 F(alpha*) finite", false, e.to_string()),
            });
        }
        (Err(e), _) | (_, Err(e)) => out.push(CheckResult::new("examples", false, e.to_string())),
    }
    out
}

fn clone_err(e: &Error) -> Error {
    Error::InvalidArgument(e.to_string())
}

/// Spot checks of `prox_{β‖·‖₁²}` against its optimality conditions.
fn prox_check() -> CheckResult {
    use rand::Rng;
    let mut rng = stream_rng(0x9e37, Stream::Solver);
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let n = rng.random_range(1..12);
        let beta = rng.random_range(0.01..5.0);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let u = prox_sq_l1(&x, beta);
        let s: f64 = u.iter().map(|v| v.abs()).sum();
        for (xi, ui) in x.iter().zip(&u) {
            // (x − u)/(2β) must be a subgradient of ‖·‖₁ scaled by s
            let g = (xi - ui) / (2.0 * beta);
            let err = if *ui != 0.0 {
                (g - s * ui.signum()).abs()
            } else {
                (xi.abs() - 2.0 * beta * s).max(0.0)
            };
            worst = worst.max(err / (1.0 + s));
        }
    }
    CheckResult::new(
        "prox optimality",
        worst <= 1e-9,
        format!("worst scaled violation {worst:.2e}"),
    )
}

/// Samples `‖Φ(x) − Φ(y)‖ ≤ 5n‖x − y‖`.
pub fn lipschitz_check(n: usize, pairs: usize, seed: u64) -> CheckResult {
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = stream_rng(seed, Stream::Solver);
    let mut worst: f64 = 0.0;
    for k in 0..pairs {
        let x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        // alternate far pairs and near pairs
        let scale = if k % 2 == 0 { 1.0 } else { 1e-3 };
        let y: Vec<f64> = x
            .iter()
            .map(|v| v + scale * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
            .collect();
        let (Ok(px), Ok(py)) = (phi_map(&x), phi_map(&y)) else {
            continue;
        };
        let d = norm_l2(&sub(&x, &y));
        if d > 0.0 {
            worst = worst.max(norm_l2(&sub(&px, &py)) / d);
        }
    }
    let bound = 5.0 * n as f64;
    CheckResult::new(
        format!("phi Lipschitz n={n}"),
        worst <= bound,
        format!("largest ratio {worst:.4} vs bound {bound}"),
    )
}

pub fn verify_suite(check: VerifyCheck) -> Vec<CheckResult> {
    let mut out = Vec::new();
    if matches!(check, VerifyCheck::All | VerifyCheck::Spectrum) {
        for n in [2usize, 4, 8, 16, 32] {
            for alpha in [0.5, 1.0, 2.0, n as f64] {
                out.push(spectrum_check(n, alpha));
            }
        }
    }
    if matches!(check, VerifyCheck::All | VerifyCheck::Examples) {
        out.extend(example_checks());
    }
    if matches!(check, VerifyCheck::All | VerifyCheck::Prox) {
        out.push(prox_check());
    }
    if matches!(check, VerifyCheck::All | VerifyCheck::Lipschitz) {
        for n in [2usize, 10, 100] {
            out.push(lipschitz_check(n, 2000, n as u64));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensing::MatrixFamily;

    fn small_spec() -> ExperimentSpec {
        ExperimentSpec {
            schema: EXPERIMENT_SCHEMA.into(),
            matrix: MatrixSpec::dct(20, 80, 1.0, 0),
            signal: SignalGrid {
                s: vec![1, 3],
                magnitude: MagnitudeModel::DynamicRange { d: 1.0 },
                min_separation: None,
            },
            noise: NoiseSpec::noiseless(),
            solver: None,
            trials: 3,
            base_seed: 11,
            success_threshold: 1e-3,
            output: None,
        }
    }

    #[test]
    fn relative_error_cases() {
        let x = [1.0, -2.0, 3.0];
        assert_eq!(relative_error(&x, &x).unwrap(), 0.0);
        assert_eq!(relative_error(&[0.0; 3], &x).unwrap(), 1.0);
        let y: Vec<f64> = x.iter().map(|v| 1.001 * v).collect();
        assert!((relative_error(&y, &x).unwrap() - 1e-3).abs() < 1e-12);
        assert!(relative_error(&x, &[0.0; 3]).is_err());
    }

    #[test]
    fn spec_defaults_and_validation() {
        let text = r#"{"matrix":{"family":"oversampled-dct","m":8,"n":32,"E":2},
                       "signal":{"s":[2],"magnitude":{"model":"dynamic-range","d":2}}}"#;
        let spec = ExperimentSpec::from_json(text).unwrap();
        assert_eq!(spec.trials, 50);
        assert_eq!(spec.success_threshold, 1e-3);
        assert_eq!(spec.signal_spec(2, 0).min_separation, 4);
        assert_eq!(spec.solver_config().rho, 100.0);
        let bad = text.replace("\"s\":[2]", "\"s\":[]");
        assert!(ExperimentSpec::from_json(&bad).is_err());
        let mut s = small_spec();
        s.trials = 0;
        assert!(s.validate().is_err());
        s.trials = 1;
        s.schema = "tau2-exp/2".into();
        assert!(s.validate().is_err());
        let g = ExperimentSpec {
            matrix: MatrixSpec::gaussian(8, 32, 0.2, 0),
            ..small_spec()
        };
        assert_eq!(g.matrix.family, MatrixFamily::CorrelatedGaussian);
        assert_eq!(g.solver_config().rho, 2.0);
    }

    #[test]
    fn experiment_is_deterministic_and_consistent() {
        let spec = small_spec();
        let a = run_experiment(&spec).unwrap();
        let b = run_experiment(&spec).unwrap();
        assert_eq!(a.len(), 6);
        let strip = |r: &[TrialRecord]| {
            results_csv(r)
                .lines()
                .map(|l| {
                    let mut f: Vec<&str> = l.split(',').collect();
                    f.remove(7);
                    f.join(",")
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(strip(&a), strip(&b));
        for r in &a {
            assert_eq!(r.success, r.relative_error < spec.success_threshold);
            assert_eq!(r.seed, 11 + r.trial as u64);
        }
        let summary = summarize(&spec, &a);
        for c in &summary.cells {
            let k = a.iter().filter(|r| r.s == c.s && r.success).count();
            assert_eq!(c.success_rate, format!("{:.6}", k as f64 / 3.0));
        }
    }

    #[test]
    fn csv_has_header_and_fixed_time_format() {
        let r = TrialRecord {
            trial: 0,
            seed: 5,
            s: 2,
            relative_error: 0.5,
            success: false,
            outer_iters: 1,
            inner_iters: 2,
            wall_seconds: 0.123456,
            alpha_final: 1.5,
            status: "converged".into(),
        };
        let text = results_csv(&[r]);
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(RESULTS_HEADER));
        assert_eq!(lines.next(), Some("0,5,2,0.5,0,1,2,0.1235,1.5,converged"));
    }

    #[test]
    fn verification_suite_passes() {
        for c in verify_suite(VerifyCheck::Spectrum)
            .into_iter()
            .chain(verify_suite(VerifyCheck::Prox))
            .chain(verify_suite(VerifyCheck::Lipschitz))
        {
            assert!(c.passed, "{c:?}");
        }
    }
}
