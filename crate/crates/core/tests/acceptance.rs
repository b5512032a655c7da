//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

use std::time::{Duration, Instant};

use rand::Rng;

use tau2::harness::{
    example1_system, example2_system, lipschitz_check, run_experiment_detailed, spectrum_check, ExperimentSpec,
    TrialOutcome,
};
use tau2::linalg::{norm_l1, norm_l2, norm_l2_sq, DenseMatrix};
use tau2::prox::prox_sq_l1;
use tau2::reform::{
    alpha_bar_exact, alpha_star_exact, eval_f_bruteforce, export_qp, kernel_model, split_signs, QpExport, QpMode,
};
use tau2::sensing::{stream_rng, Augmentation, MatrixSpec, NoiseSpec, Stream};
use tau2::solver::{recover, RecoveryProblem, SolverConfig};

mod common;
use common::prox_oracle;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn timed(budget: Duration, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut o = f();
    let spent = start.elapsed();
    if spent > budget {
        o.passed = false;
    }
    o.detail = format!("{} [{:.1}s of {}s]", o.detail, spent.as_secs_f64(), budget.as_secs());
    o
}

fn experiment(matrix: MatrixSpec, s: &[usize], d: f64, noise: NoiseSpec, trials: usize) -> ExperimentSpec {
    let text = format!(
        r#"{{"matrix":{},"signal":{{"s":{:?},"magnitude":{{"model":"dynamic-range","d":{d}}}}},"noise":{},"trials":{trials}}}"#,
        serde_json::to_string(&matrix).unwrap(),
        s,
        serde_json::to_string(&noise).unwrap()
    );
    ExperimentSpec::from_json(&text).unwrap()
}

fn success_rate(outcomes: &[TrialOutcome], s: usize) -> f64 {
    let cell: Vec<_> = outcomes.iter().filter(|o| o.record.s == s).collect();
    cell.iter().filter(|o| o.record.success).count() as f64 / cell.len() as f64
}

fn criterion_1() -> Outcome {
    let mut rng = stream_rng(1, Stream::Solver);
    let mut worst: f64 = 0.0;
    for k in 0..200 {
        let n = [1usize, 2, 3, 6][k % 4];
        let beta = rng.random_range(0.01..5.0);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let got = prox_sq_l1(&x, beta);
        let want = prox_oracle(&x, beta);
        worst = got.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(worst, f64::max);
    }
    outcome(worst <= 1e-6, format!("worst deviation {worst:.2e} over 200 pairs"))
}

fn criterion_2() -> Outcome {
    let mut failed = Vec::new();
    for n in [2usize, 4, 8, 16, 32] {
        for alpha in [0.5, 1.0, 2.0, n as f64] {
            let c = spectrum_check(n, alpha);
            if !c.passed {
                failed.push(format!("{}: {}", c.name, c.detail));
            }
        }
    }
    outcome(failed.is_empty(), format!("20 (n, alpha) cases, failures {failed:?}"))
}

fn criterion_3() -> Outcome {
    let (a1, b1) = example1_system();
    let (a2, b2) = example2_system();
    let m1 = kernel_model(&a1, &b1).unwrap();
    let m2 = kernel_model(&a2, &b2).unwrap();
    let star1 = alpha_star_exact(&m1).unwrap();
    let bar1 = alpha_bar_exact(&m1).unwrap();
    let f1 = eval_f_bruteforce(&m1, star1, 1000).unwrap();
    let star2 = alpha_star_exact(&m2).unwrap();
    let bar2 = alpha_bar_exact(&m2).unwrap();
    let f2 = eval_f_bruteforce(&m2, star2, 10_000).unwrap();
    let ok = (star1 - 121.0 / 27.0).abs() <= 1e-9
        && (bar1.value - 1521.0 / 581.0).abs() <= 1e-6
        && bar1.attained
        && f1.unbounded
        && (star2 - 2.0).abs() <= 1e-6
        && (bar2.value - 2.0).abs() <= 1e-4
        && !bar2.attained
        && !f2.unbounded;
    outcome(
        ok,
        format!(
            "ex1 alpha*={star1:.12} alpha-bar={:.9} F unbounded={}; ex2 alpha*={star2:.9} alpha-bar={:.6} attained={} F={}",
            bar1.value, f1.unbounded, bar2.value, bar2.attained, f2.value
        ),
    )
}

fn criterion_4() -> Outcome {
    let config = SolverConfig {
        inner_tol: 1e-8,
        ..SolverConfig::default()
    };
    let mut worst = f64::NEG_INFINITY;
    let mut steps = 0;
    let mut errors = 0;
    for k in 0..100u64 {
        // alternate noiseless and slightly noisy instances across two families
        let matrix = if k % 4 < 2 {
            MatrixSpec::dct(16, 64, 1.0, k)
        } else {
            MatrixSpec::gaussian(16, 64, 0.3, k)
        };
        let noise = NoiseSpec {
            sigma: if k % 2 == 0 { 0.0 } else { 1e-3 },
            eps_factor: 1.2,
        };
        let spec = experiment(matrix, &[3], 2.0, noise, 1);
        let inst = tau2::harness::generate_instance(&spec.matrix, &spec.signal_spec(3, k), &spec.noise, k).unwrap();
        let result = RecoveryProblem::new(inst.a, inst.b, inst.eps).and_then(|p| recover(&p, &config));
        let Ok(r) = result else {
            errors += 1;
            continue;
        };
        for (i, dx) in r.step_trace.iter().enumerate() {
            let (a0, a1) = (r.alpha_trace[i], r.alpha_trace[i + 1]);
            let xn = r.norm_trace[i + 1];
            let bound = a0 * (1.0 - dx * dx / (xn * xn)) + 1e-6;
            worst = worst.max(a1 - bound);
            steps += 1;
        }
    }
    outcome(
        worst <= 0.0 && errors == 0,
        format!("{steps} outer steps, largest excess {worst:.2e}, solver errors {errors}"),
    )
}

fn criterion_5() -> Outcome {
    let checks: Vec<_> = [2usize, 10, 100].iter().map(|&n| lipschitz_check(n, 10_000, 50 + n as u64)).collect();
    let ok = checks.iter().all(|c| c.passed);
    let detail: Vec<String> = checks.iter().map(|c| format!("{}: {}", c.name, c.detail)).collect();
    outcome(ok, detail.join("; "))
}

fn criterion_6(outcomes: &[TrialOutcome]) -> Outcome {
    let r5 = success_rate(outcomes, 5);
    let r2 = success_rate(outcomes, 2);
    outcome(r5 >= 0.8 && r2 >= 0.95, format!("s=5 success {r5:.2}, s=2 success {r2:.2}"))
}

fn criterion_7(outcomes: &[TrialOutcome]) -> Outcome {
    let errs: Vec<f64> = outcomes.iter().map(|o| o.record.relative_error).collect();
    let mean = errs.iter().sum::<f64>() / errs.len() as f64;
    let bound = 3.0 * 4.074e-3;
    outcome(mean <= bound, format!("mean relative error {mean:.4e} (bound {bound:.4e})"))
}

fn criterion_8(outcomes: &[TrialOutcome]) -> Outcome {
    let mut worst_res = f64::NEG_INFINITY;
    let mut worst_dink = f64::NEG_INFINITY;
    let mut missing = 0;
    for o in outcomes {
        let (Some(inst), Some(r)) = (&o.instance, &o.result) else {
            missing += 1;
            continue;
        };
        let slack = inst.eps + 1e-6 * norm_l2(&inst.b).max(1.0);
        worst_res = worst_res.max(r.feasibility_residual - slack);
        for v in &r.dinkelbach_trace {
            worst_dink = worst_dink.max(*v);
        }
    }
    outcome(
        worst_res <= 0.0 && worst_dink <= 1e-6 && missing == 0,
        format!(
            "{} trials, residual excess {worst_res:.2e}, largest subproblem value {worst_dink:.2e}, failed runs {missing}",
            outcomes.len()
        ),
    )
}

fn criterion_9() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for d in [3.0, 5.0] {
        let base = run_experiment_detailed(&experiment(
            MatrixSpec::dct(64, 1024, 10.0, 0),
            &[5],
            d,
            NoiseSpec::default(),
            20,
        ))
        .unwrap();
        let rb = success_rate(&base, 5);
        for aug in [Augmentation::Copy, Augmentation::Combine] {
            let out = run_experiment_detailed(&experiment(
                MatrixSpec::rank_deficient(64, 1024, 10.0, 5, aug, 0),
                &[5],
                d,
                NoiseSpec::default(),
                20,
            ))
            .unwrap();
            let r = success_rate(&out, 5);
            ok &= (r - rb).abs() <= 0.15 + 1e-12;
            lines.push(format!("D={d} {aug:?} {r:.2} vs {rb:.2}"));
        }
    }
    outcome(ok, lines.join(", "))
}

fn criterion_10() -> Outcome {
    let mut rng = stream_rng(10, Stream::Matrix);
    let mut worst_obj: f64 = 0.0;
    let mut min_eig = f64::INFINITY;
    for k in 0..100 {
        let n = rng.random_range(2..12);
        let m = rng.random_range(1..n);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let alpha = rng.random_range(0.0..n as f64);
        let a = DenseMatrix::new(m, n, (0..m * n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let b = a.matvec(&x);
        let eps = if k % 2 == 0 { 0.0 } else { 0.1 };
        let Ok(problem) = RecoveryProblem::new(a, b, eps) else {
            continue;
        };
        let v = split_signs(&x);
        let exact = export_qp(&problem, alpha, QpMode::ExactIndefinite, None).unwrap();
        let back = QpExport::from_json(&exact.to_json().unwrap()).unwrap();
        let want = norm_l1(&x).powi(2) - alpha * norm_l2_sq(&x);
        worst_obj = worst_obj.max((back.objective_value(&v) - want).abs());

        let mut lin = export_qp(&problem, alpha, QpMode::LinearizedConvex, Some(&x)).unwrap();
        lin.densify();
        let lin = QpExport::from_json(&lin.to_json().unwrap()).unwrap();
        let eigs = lin.objective.quadratic.to_dense().symmetric_eigenvalues().unwrap();
        min_eig = min_eig.min(eigs[0]);
    }
    outcome(
        worst_obj <= 1e-10 && min_eig >= -1e-10,
        format!("objective deviation {worst_obj:.2e}, smallest linearized eigenvalue {min_eig:.2e}"),
    )
}

fn main() {
    let mins = |m: u64| Duration::from_secs(60 * m);
    let secs = Duration::from_secs;
    let mut results: Vec<(usize, Outcome)> = vec![
        (1, timed(secs(10), criterion_1)),
        (2, timed(secs(5), criterion_2)),
        (3, timed(secs(30), criterion_3)),
        (4, timed(mins(2), criterion_4)),
        (5, timed(secs(10), criterion_5)),
    ];

    let mut noiseless = Vec::new();
    results.push((
        6,
        timed(mins(10), || {
            noiseless = run_experiment_detailed(&experiment(
                MatrixSpec::dct(64, 1024, 1.0, 0),
                &[5, 2],
                3.0,
                NoiseSpec::default(),
                20,
            ))
            .unwrap();
            criterion_6(&noiseless)
        }),
    ));
    let mut noisy = Vec::new();
    results.push((
        7,
        timed(mins(10), || {
            let noise = NoiseSpec {
                sigma: 0.01,
                eps_factor: 1.2,
            };
            noisy = run_experiment_detailed(&experiment(MatrixSpec::dct(64, 1024, 5.0, 0), &[4], 2.0, noise, 20))
                .unwrap();
            criterion_7(&noisy)
        }),
    ));
    let all: Vec<TrialOutcome> = noiseless.into_iter().chain(noisy).collect();
    results.push((8, timed(secs(60), || criterion_8(&all))));
    results.push((9, timed(mins(15), criterion_9)));
    results.push((10, timed(secs(5), criterion_10)));

    let mut failures = 0;
    for (k, o) in &results {
        println!("criterion {k:>2}: {} {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
        failures += usize::from(!o.passed);
    }
    println!("{} of {} criteria passed", results.len() - failures, results.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
