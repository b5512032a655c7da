//! Eigenvalues of the split-variable quadratic form H(α) and the explicit
//! factorization check.

use tau2::reform::verify_h_spectrum;

fn main() -> tau2::Result<()> {
    for (n, alpha) in [(2, 0.5), (4, 1.0), (8, 2.0), (16, 16.0)] {
        let r = verify_h_spectrum(n, alpha)?;
        println!(
            "n={n:>2} alpha={alpha:>4}: eigenvalue error {:.2e}, reconstruction error {:.2e}, passed {}",
            r.max_eigenvalue_error, r.reconstruction_error_columns, r.passed
        );
    }
    let r = verify_h_spectrum(3, 1.5)?;
    println!("n=3 alpha=1.5 eigenvalues {:?}", r.eigenvalues);
    Ok(())
}
