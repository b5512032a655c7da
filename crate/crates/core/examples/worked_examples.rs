//! Exact α*, ᾱ and F(α*) for two small systems with low-dimensional kernels,
//! and the solver run from two different starting points.

use tau2::harness::{example1_system, example2_system};
use tau2::reform::{alpha_bar_exact, alpha_star_exact, eval_f_bruteforce, kernel_model};
use tau2::solver::{dinkelbach_solve, recover, RecoveryProblem, SolverConfig};

fn main() -> tau2::Result<()> {
    for (name, (a, b)) in [("example 1", example1_system()), ("example 2", example2_system())] {
        let model = kernel_model(&a, &b)?;
        let star = alpha_star_exact(&model)?;
        let bar = alpha_bar_exact(&model)?;
        let f = eval_f_bruteforce(&model, star, 10_000)?;
        println!(
            "{name}: kernel dim {}, alpha* {star:.9}, alpha-bar {:.9} (attained {}), F(alpha*) {}",
            model.dim(),
            bar.value,
            bar.attained,
            if f.unbounded { "-inf".to_string() } else { format!("{:.6}", f.value) }
        );
    }

    let (a, b) = example1_system();
    let problem = RecoveryProblem::new(a, b, 0.0)?;
    let config = SolverConfig::default();
    let from_l1 = recover(&problem, &config)?;
    println!("example 1 from the l1 point:  alpha {:.9}", from_l1.alpha_final());
    let x0 = [1.0, 1.0, 1.0, 18.0, 36.0, -16.0];
    let from_x0 = dinkelbach_solve(&problem, &x0, &config)?;
    println!("example 1 from {x0:?}: alpha {:.9}", from_x0.alpha_final());
    Ok(())
}
