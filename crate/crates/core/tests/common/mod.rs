//! Reference computations shared by the test targets.

/// Reference prox: with `w = |u|` the problem becomes
/// `min β(Σw)² + ½‖w − |x|‖²` over `w ≥ 0`, solved by accelerated projected
/// gradient; signs are restored from `x`.
pub fn prox_oracle(x: &[f64], beta: f64) -> Vec<f64> {
    let n = x.len();
    let y: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    // minimize β(Σw)² + ½‖w − y‖² over w ≥ 0; gradient 2βΣw + (w − y)
    let lip = 2.0 * beta * n as f64 + 1.0;
    let mut w = vec![0.0; n];
    let mut prev = w.clone();
    for k in 0..200_000 {
        // accelerated projected gradient
        let mom = k as f64 / (k as f64 + 3.0);
        let z: Vec<f64> = w.iter().zip(&prev).map(|(a, b)| a + mom * (a - b)).collect();
        let s: f64 = z.iter().sum();
        prev = w.clone();
        for i in 0..n {
            let g = 2.0 * beta * s + (z[i] - y[i]);
            w[i] = (z[i] - g / lip).max(0.0);
        }
        let step: f64 = w.iter().zip(&prev).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if k > 100 && step < 1e-15 {
            break;
        }
    }
    w.iter().zip(x).map(|(wi, xi)| wi.copysign(*xi)).collect()
}
