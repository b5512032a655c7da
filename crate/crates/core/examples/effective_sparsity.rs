//! Effective sparsity of a few vectors: τ_q for several q and the τ₂ report.

use tau2::linalg::{sparsity_report, tau_q};

fn main() -> tau2::Result<()> {
    let vectors: [(&str, Vec<f64>); 3] = [
        ("3-sparse, equal magnitudes", vec![1.0, 0.0, -1.0, 0.0, 1.0, 0.0]),
        ("3-sparse, wide dynamic range", vec![100.0, 0.0, 1.0, 0.0, 0.01, 0.0]),
        ("dense", vec![1.0, 0.9, 1.1, 1.0, 0.95, 1.05]),
    ];
    for (name, x) in vectors {
        let r = sparsity_report(&x)?;
        print!("{name:<30} l0={} tau2={:.4}", r.l0, r.tau2);
        for q in [0.5, 2.0, 4.0] {
            print!(" tau_{q}={:.4}", tau_q(&x, q)?);
        }
        println!();
    }
    Ok(())
}
