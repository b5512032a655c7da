//! Exports the exact (indefinite) and linearized (convex) quadratic programs
//! for a small system and evaluates them at a feasible point.

use tau2::harness::example1_system;
use tau2::linalg::{norm_l1, norm_l2_sq};
use tau2::reform::{export_qp, split_signs, QpExport, QpMode};
use tau2::solver::RecoveryProblem;

fn main() -> tau2::Result<()> {
    let (a, b) = example1_system();
    let problem = RecoveryProblem::new(a, b, 0.0)?;
    let x = [1.0, 1.0, 1.0, 18.0, 36.0, -16.0];
    let v = split_signs(&x);
    let alpha = 2.5;

    let exact = QpExport::from_json(&export_qp(&problem, alpha, QpMode::ExactIndefinite, None)?.to_json()?)?;
    println!(
        "exact objective {:.6} vs ‖x‖₁² − α‖x‖₂² = {:.6}",
        exact.objective_value(&v),
        norm_l1(&x).powi(2) - alpha * norm_l2_sq(&x)
    );
    println!("constraint violation {:.2e}", exact.constraint.violation(&v));

    let linear = export_qp(&problem, alpha, QpMode::LinearizedConvex, Some(&x))?;
    println!("linearized objective at the anchor {:.6}", linear.objective_value(&v));
    println!("{}", linear.to_json()?);
    Ok(())
}
