//! Closed-form proximity operators.

use crate::linalg::norm_l2;

/// Scratch space for [`prox_sq_l1`]: the input's magnitudes sorted in
/// nonincreasing order together with the signed permutation that produced
/// them. Reusing one workspace across calls avoids per-call allocation.
#[derive(Clone, Debug, Default)]
pub struct ProxWorkspace {
    /// `|x|` in nonincreasing order.
    pub sorted: Vec<f64>,
    /// `(original index, sign)` for each sorted position.
    pub signed_perm: Vec<(usize, f64)>,
}

impl ProxWorkspace {
    pub fn new(n: usize) -> Self {
        Self {
            sorted: Vec::with_capacity(n),
            signed_perm: Vec::with_capacity(n),
        }
    }

    fn load(&mut self, x: &[f64]) {
        self.signed_perm.clear();
        self.signed_perm
            .extend(x.iter().enumerate().map(|(i, &v)| (i, if v < 0.0 { -1.0 } else { 1.0 })));
        // stable: equal magnitudes keep their original order
        self.signed_perm
            .sort_by(|a, b| x[b.0].abs().total_cmp(&x[a.0].abs()).then(a.0.cmp(&b.0)));
        self.sorted.clear();
        self.sorted.extend(self.signed_perm.iter().map(|&(i, _)| x[i].abs()));
    }

    /// `prox_{β‖·‖₁²}(x)` written into `out`.
    ///
    /// Walks down the sorted magnitudes `y₁ ≥ y₂ ≥ …`, keeping the running
    /// shrinkage `r = (y₁ + … + y_k) / (2kβ + 1)`, and stops at the first `k`
    /// with `y_{k+1} ≤ 2βr`. The result is `u_i = y_i − 2βr` on the leading
    /// `k` positions and zero elsewhere, mapped back through the signed
    /// permutation. If the stopping test never fires every entry is active.
    pub fn prox_sq_l1_into(&mut self, x: &[f64], beta: f64, out: &mut [f64]) {
        debug_assert!(beta > 0.0);
        debug_assert_eq!(x.len(), out.len());
        out.iter_mut().for_each(|v| *v = 0.0);
        let n = x.len();
        if n == 0 {
            return;
        }
        self.load(x);
        let y = &self.sorted;
        if y[0] == 0.0 {
            return;
        }

        let mut k = 1;
        let mut partial = y[0];
        let mut r = partial / (2.0 * beta + 1.0);
        while k < n {
            if y[k] <= 2.0 * beta * r {
                break;
            }
            partial += y[k];
            k += 1;
            r = partial / (2.0 * (k as f64) * beta + 1.0);
        }

        let shrink = 2.0 * beta * r;
        for (pos, &(idx, sign)) in self.signed_perm.iter().take(k).enumerate() {
            out[idx] = sign * (y[pos] - shrink).max(0.0);
        }
    }
}

/// Proximity operator of `β‖·‖₁²`: the unique minimizer of
/// `β‖u‖₁² + ½‖u − x‖₂²`. Defined as zero at `x = 0`.
pub fn prox_sq_l1(x: &[f64], beta: f64) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    ProxWorkspace::new(x.len()).prox_sq_l1_into(x, beta, &mut out);
    out
}

/// Soft thresholding, `sign(x_i) · max(|x_i| − t, 0)`.
pub fn prox_l1(x: &[f64], t: f64) -> Vec<f64> {
    let mut out = x.to_vec();
    prox_l1_in_place(&mut out, t);
    out
}

pub fn prox_l1_in_place(x: &mut [f64], t: f64) {
    for v in x.iter_mut() {
        let mag = v.abs() - t;
        *v = if mag > 0.0 { mag.copysign(*v) } else { 0.0 };
    }
}

/// Projection onto the ball `{z : ‖z − b‖₂ ≤ ε}`:
/// `b + min{1, ε/‖u − b‖₂}(u − b)`.
pub fn project_ball(u: &[f64], b: &[f64], eps: f64) -> Vec<f64> {
    let mut out = u.to_vec();
    project_ball_in_place(&mut out, b, eps);
    out
}

pub fn project_ball_in_place(u: &mut [f64], b: &[f64], eps: f64) {
    debug_assert_eq!(u.len(), b.len());
    if eps <= 0.0 {
        u.copy_from_slice(b);
        return;
    }
    let mut d: f64 = 0.0;
    for (ui, bi) in u.iter().zip(b) {
        d += (ui - bi) * (ui - bi);
    }
    let d = d.sqrt();
    if d <= eps {
        return;
    }
    let f = eps / d;
    for (ui, bi) in u.iter_mut().zip(b) {
        *ui = bi + f * (*ui - bi);
    }
    // guard against the rescaled point landing a rounding error outside
    let dist = norm_l2(&u.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>());
    if dist > eps {
        let g = eps / dist;
        for (ui, bi) in u.iter_mut().zip(b) {
            *ui = bi + g * (*ui - bi);
        }
    }
}
