//! Generates each sensing matrix family and reports coherence and rank.

use tau2::linalg::LeastNormSolver;
use tau2::sensing::{gen_matrix, mutual_coherence, Augmentation, MatrixSpec};

fn main() -> tau2::Result<()> {
    let specs = [
        ("DCT E=1", MatrixSpec::dct(64, 512, 1.0, 0)),
        ("DCT E=10", MatrixSpec::dct(64, 512, 10.0, 0)),
        ("Gaussian r=0.5", MatrixSpec::gaussian(64, 512, 0.5, 0)),
        ("DCT E=10 + 5 copied rows", MatrixSpec::rank_deficient(64, 512, 10.0, 5, Augmentation::Copy, 0)),
        ("DCT E=10 + 5 combined rows", MatrixSpec::rank_deficient(64, 512, 10.0, 5, Augmentation::Combine, 0)),
    ];
    for (name, spec) in specs {
        let a = gen_matrix(&spec)?;
        println!(
            "{name:<28} {}x{} coherence {:.4} rank {}",
            a.rows(),
            a.cols(),
            mutual_coherence(&a),
            LeastNormSolver::new(&a).rank()
        );
    }
    Ok(())
}
