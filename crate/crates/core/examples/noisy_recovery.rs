//! Recovery from noisy measurements with the ε-ball constraint.

use tau2::harness::{generate_instance, relative_error};
use tau2::sensing::{MagnitudeModel, MatrixFamily, MatrixSpec, NoiseSpec, SignalSpec};
use tau2::solver::{recover, RecoveryProblem, SolverConfig};

fn main() -> tau2::Result<()> {
    let matrix = MatrixSpec::dct(64, 1024, 5.0, 0);
    let signal = SignalSpec {
        n: 1024,
        s: 4,
        magnitude: MagnitudeModel::DynamicRange { d: 2.0 },
        min_separation: matrix.default_min_separation(),
        seed: 0,
    };
    let noise = NoiseSpec {
        sigma: 0.01,
        eps_factor: 1.2,
    };
    let inst = generate_instance(&matrix, &signal, &noise, 3)?;
    let problem = RecoveryProblem::new(inst.a, inst.b, inst.eps)?;
    let result = recover(&problem, &SolverConfig::for_family(MatrixFamily::OversampledDct, true))?;
    println!("eps {:.4e}, final residual {:.4e}", problem.eps(), result.feasibility_residual);
    println!("tau2 {:.4} after {} outer steps", result.alpha_final(), result.outer_iters);
    println!("relative error {:.3e}", relative_error(&result.x, &inst.x_true)?);
    Ok(())
}
