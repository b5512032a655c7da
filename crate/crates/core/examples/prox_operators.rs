//! The three proximity operators used by the solver.

use tau2::prox::{project_ball, prox_l1, prox_sq_l1};

fn main() {
    let x = [3.0, -1.0, 0.5, 0.0, -2.5];
    for beta in [0.05, 0.2, 1.0] {
        println!("prox of {beta}·‖·‖₁²: {:?}", prox_sq_l1(&x, beta));
    }
    println!("soft threshold at 1:   {:?}", prox_l1(&x, 1.0));
    let b = [0.0; 5];
    println!("projection onto the radius-1 ball: {:?}", project_ball(&x, &b, 1.0));
}
