//! Recovers a separated sparse signal from exact DCT measurements.

use tau2::harness::{generate_instance, relative_error};
use tau2::sensing::{MagnitudeModel, MatrixFamily, MatrixSpec, NoiseSpec, SignalSpec};
use tau2::solver::{recover, RecoveryProblem, SolverConfig};

fn main() -> tau2::Result<()> {
    let matrix = MatrixSpec::dct(64, 1024, 1.0, 0);
    let signal = SignalSpec {
        n: 1024,
        s: 8,
        magnitude: MagnitudeModel::DynamicRange { d: 3.0 },
        min_separation: matrix.default_min_separation(),
        seed: 0,
    };
    let inst = generate_instance(&matrix, &signal, &NoiseSpec::default(), 11)?;
    let problem = RecoveryProblem::new(inst.a, inst.b, inst.eps)?;
    let result = recover(&problem, &SolverConfig::for_family(MatrixFamily::OversampledDct, false))?;
    println!("status {:?} after {} outer steps", result.status, result.outer_iters);
    println!("alpha trace {:?}", result.alpha_trace);
    println!("relative error {:.3e}", relative_error(&result.x, &inst.x_true)?);
    Ok(())
}
