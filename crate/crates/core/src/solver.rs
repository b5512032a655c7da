//! The τ₂ solver: Dinkelbach outer loop over linearized convex subproblems,
//! each solved by AD-LPMM, plus the ℓ1 and noisy-case initializers.
//!
//! With `c` the previous iterate and `α` its ratio, every outer step solves
//!
//! ```text
//! min ‖x‖₁² − 2α⟨c, x⟩   s.t.   ‖Ax − b‖₂ ≤ ε
//! ```
//!
//! by splitting `z = Ax`:
//!
//! ```text
//! x⁺ = prox_{‖·‖₁²/η}( x − (ρ/η)Aᵀ(Ax − z + y/ρ) + (2α/η)c )
//! z⁺ = P_ball( z + (ρ/β)(Ax⁺ − z + y/ρ) )
//! y⁺ = y + ρ(Ax⁺ − z⁺)
//! ```
//!
//! with `η = ρ·λ_max(AᵀA)`. For `ε = 0` the ball collapses to `{b}` and `z`
//! is pinned to `b`.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    axpy, dot, lambda_max_gram, norm_l1, norm_l2, norm_l2_sq, sub, tau2, DenseMatrix, LeastNormSolver,
};
use crate::prox::{project_ball_in_place, prox_l1_in_place, ProxWorkspace};
use crate::sensing::MatrixFamily;

/// Relative tolerance and iteration cap used for `λ_max(AᵀA)`.
const POWER_TOL: f64 = 1e-10;
const POWER_MAX_ITER: usize = 100_000;

/// `min τ₂(x)` subject to `‖Ax − b‖₂ ≤ ε`.
#[derive(Debug)]
pub struct RecoveryProblem {
    a: DenseMatrix,
    b: Vec<f64>,
    eps: f64,
    lipschitz: OnceLock<f64>,
    least_norm: OnceLock<LeastNormSolver>,
}

impl Clone for RecoveryProblem {
    fn clone(&self) -> Self {
        Self {
            a: self.a.clone(),
            b: self.b.clone(),
            eps: self.eps,
            lipschitz: self.lipschitz.clone(),
            least_norm: self.least_norm.clone(),
        }
    }
}

impl RecoveryProblem {
    /// Validates shapes, `b ≠ 0`, `ε ≥ 0`, and that the feasible set is
    /// nonempty (the least-squares point must lie within the ball).
    pub fn new(a: DenseMatrix, b: Vec<f64>, eps: f64) -> Result<Self> {
        if b.len() != a.rows() {
            return Err(Error::Dimension(format!(
                "measurements have length {}, matrix has {} rows",
                b.len(),
                a.rows()
            )));
        }
        crate::linalg::check_finite(&b)?;
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(Error::InvalidArgument(format!("noise budget must be >= 0, got {eps}")));
        }
        if b.iter().all(|v| *v == 0.0) {
            return Err(Error::InvalidArgument("measurement vector must be nonzero".into()));
        }
        let p = Self {
            a,
            b,
            eps,
            lipschitz: OnceLock::new(),
            least_norm: OnceLock::new(),
        };
        let x = p.least_norm_point()?;
        let r = p.residual(&x);
        if r > eps + 1e-8 * p.b_scale() {
            return Err(Error::Infeasible(format!(
                "least-squares residual {r:.3e} exceeds the budget {eps:.3e}"
            )));
        }
        Ok(p)
    }

    pub fn a(&self) -> &DenseMatrix {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn n(&self) -> usize {
        self.a.cols()
    }

    pub fn m(&self) -> usize {
        self.a.rows()
    }

    fn b_scale(&self) -> f64 {
        norm_l2(&self.b).max(1.0)
    }

    /// `‖Ax − b‖₂`
    pub fn residual(&self, x: &[f64]) -> f64 {
        norm_l2(&sub(&self.a.matvec(x), &self.b))
    }

    /// Feasibility with the solver slack `1e-6 · max(1, ‖b‖₂)`.
    pub fn is_feasible(&self, x: &[f64]) -> bool {
        self.residual(x) <= self.eps + 1e-6 * self.b_scale()
    }

    /// `λ_max(AᵀA)`, computed once.
    pub fn lipschitz(&self) -> f64 {
        *self.lipschitz.get_or_init(|| {
            match lambda_max_gram(&self.a, POWER_TOL, POWER_MAX_ITER) {
                Ok(l) => l,
                // Rayleigh quotients underestimate; nudge up so η stays admissible
                Err(Error::NoConvergence { estimate, .. }) => estimate * (1.0 + 1e-6),
                Err(_) => 0.0,
            }
        })
    }

    pub fn least_norm_solver(&self) -> &LeastNormSolver {
        self.least_norm.get_or_init(|| LeastNormSolver::new(&self.a))
    }

    /// `A†b`
    pub fn least_norm_point(&self) -> Result<Vec<f64>> {
        self.least_norm_solver().solve(&self.b)
    }

    /// Pulls an almost-feasible point back into the constraint set.
    ///
    /// For `ε = 0` adds the least-norm correction `A†(b − Ax)`; for `ε > 0`
    /// a point outside the ball is moved along the segment from `A†b`, the
    /// same map used by [`noisy_initial_point`].
    pub fn restore_feasibility(&self, x: &mut [f64]) -> Result<()> {
        let ax = self.a.matvec(x);
        let r = sub(&self.b, &ax);
        if self.eps == 0.0 {
            let dx = self.least_norm_solver().solve(&r)?;
            axpy(1.0, &dx, x);
            return Ok(());
        }
        let rn = norm_l2(&r);
        if rn > self.eps {
            let center = self.least_norm_point()?;
            let f = self.eps / rn;
            for (xi, ci) in x.iter_mut().zip(&center) {
                *xi = ci + f * (*xi - ci);
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// augmented-Lagrangian penalty ρ
    pub rho: f64,
    /// z-step parameter β (used when ε > 0), at least ρ
    pub beta: f64,
    /// η = eta_factor · ρ · λ_max(AᵀA), at least 1
    pub eta_factor: f64,
    pub outer_tol: f64,
    /// `None` means `5n`.
    pub outer_max_iter: Option<usize>,
    pub inner_tol: f64,
    pub inner_max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rho: 100.0,
            beta: 100.0,
            eta_factor: 1.0,
            outer_tol: 1e-6,
            outer_max_iter: None,
            inner_tol: 1e-8,
            inner_max_iter: 10_000,
        }
    }
}

impl SolverConfig {
    /// Defaults per matrix family: ρ = 100 for DCT matrices and 2 for
    /// Gaussian ones without noise; β = ρ = 80 with noise.
    pub fn for_family(family: MatrixFamily, noisy: bool) -> Self {
        let rho = match (noisy, family) {
            (true, _) => 80.0,
            (false, MatrixFamily::CorrelatedGaussian) => 2.0,
            (false, _) => 100.0,
        };
        Self {
            rho,
            beta: rho,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Err(Error::InvalidArgument(format!("{what} invalid: {v}")));
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return bad("rho", self.rho);
        }
        if !(self.beta >= self.rho && self.beta.is_finite()) {
            return bad("beta (must be >= rho)", self.beta);
        }
        if !(self.eta_factor >= 1.0 && self.eta_factor.is_finite()) {
            return bad("eta_factor (must be >= 1)", self.eta_factor);
        }
        if !(self.outer_tol > 0.0) {
            return bad("outer_tol", self.outer_tol);
        }
        if !(self.inner_tol > 0.0) {
            return bad("inner_tol", self.inner_tol);
        }
        Ok(())
    }

    fn outer_cap(&self, n: usize) -> usize {
        self.outer_max_iter.unwrap_or(5 * n)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Converged,
    MaxIter,
    /// the subproblem returned the zero vector, where τ₂ is undefined
    Degenerate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverResult {
    pub x: Vec<f64>,
    /// `α⁽⁰⁾, α⁽¹⁾, …`
    pub alpha_trace: Vec<f64>,
    /// `‖x⁽ᵏ⁾‖₁² − α⁽ᵏ⁻¹⁾‖x⁽ᵏ⁾‖₂²` for `k ≥ 1`
    pub dinkelbach_trace: Vec<f64>,
    /// `‖x⁽ᵏ⁾‖₂` for `k ≥ 0`, for inspecting boundedness of the iterates
    pub norm_trace: Vec<f64>,
    /// `‖x⁽ᵏ⁺¹⁾ − x⁽ᵏ⁾‖₂` for each accepted step
    pub step_trace: Vec<f64>,
    pub outer_iters: usize,
    pub inner_iters_total: usize,
    pub status: Status,
    pub feasibility_residual: f64,
}

impl SolverResult {
    pub fn alpha_final(&self) -> f64 {
        *self.alpha_trace.last().unwrap_or(&f64::NAN)
    }
}

/// Primal/auxiliary/dual iterates of AD-LPMM, kept for warm starts.
#[derive(Clone, Debug, PartialEq)]
pub struct AdlpmmState {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub y: Vec<f64>,
}

impl AdlpmmState {
    /// `x` as given, `z` its measurement projected onto the ball, `y = 0`.
    pub fn from_point(problem: &RecoveryProblem, x: &[f64]) -> Self {
        let mut z = problem.a.matvec(x);
        project_ball_in_place(&mut z, &problem.b, problem.eps);
        Self {
            x: x.to_vec(),
            z,
            y: vec![0.0; problem.m()],
        }
    }
}

#[derive(Clone, Debug)]
pub struct SubproblemOutcome {
    pub x: Vec<f64>,
    pub inner_iters: usize,
    /// false when `inner_max_iter` ran out before the stopping test passed
    pub converged: bool,
    pub state: AdlpmmState,
}

/// Which proximal step the splitting uses on `x`.
#[derive(Clone, Copy)]
enum Regularizer {
    /// `‖x‖₁² − 2α⟨c, x⟩`
    SquaredL1 { alpha: f64 },
    /// `‖x‖₁`
    L1,
}

struct Splitting<'a> {
    problem: &'a RecoveryProblem,
    rho: f64,
    beta: f64,
    eta: f64,
    tol: f64,
    max_iter: usize,
}

impl Splitting<'_> {
    fn run(&self, reg: Regularizer, c: Option<&[f64]>, mut st: AdlpmmState) -> SubproblemOutcome {
        let p = self.problem;
        let (m, n) = (p.m(), p.n());
        let noiseless = p.eps == 0.0;
        if noiseless {
            st.z.copy_from_slice(&p.b);
        }
        let b_scale = norm_l2(&p.b).max(1.0);
        let step = self.rho / self.eta;

        let mut ws = ProxWorkspace::new(n);
        let mut ax = p.a.matvec(&st.x);
        let mut r = vec![0.0; m];
        let mut g = vec![0.0; n];
        let mut arg = vec![0.0; n];
        let mut x_new = vec![0.0; n];

        let mut iters = 0;
        let mut converged = false;
        while iters < self.max_iter {
            iters += 1;
            // r = Ax − z + y/ρ
            for i in 0..m {
                r[i] = ax[i] - st.z[i] + st.y[i] / self.rho;
            }
            p.a.tr_matvec_into(&r, &mut g);
            for j in 0..n {
                arg[j] = st.x[j] - step * g[j];
            }
            match reg {
                Regularizer::SquaredL1 { alpha } => {
                    if let Some(c) = c {
                        axpy(2.0 * alpha / self.eta, c, &mut arg);
                    }
                    ws.prox_sq_l1_into(&arg, 1.0 / self.eta, &mut x_new);
                }
                Regularizer::L1 => {
                    x_new.copy_from_slice(&arg);
                    prox_l1_in_place(&mut x_new, 1.0 / self.eta);
                }
            }
            p.a.matvec_into(&x_new, &mut ax);

            if !noiseless {
                let f = self.rho / self.beta;
                for i in 0..m {
                    st.z[i] += f * (ax[i] - st.z[i] + st.y[i] / self.rho);
                }
                project_ball_in_place(&mut st.z, &p.b, p.eps);
            }
            let mut feas = 0.0;
            for i in 0..m {
                let d = ax[i] - st.z[i];
                st.y[i] += self.rho * d;
                feas += d * d;
            }

            let mut dx = 0.0;
            for j in 0..n {
                let d = x_new[j] - st.x[j];
                dx += d * d;
            }
            let rel_dx = dx.sqrt() / norm_l2(&st.x).max(1.0);
            std::mem::swap(&mut st.x, &mut x_new);
            if rel_dx.max(feas.sqrt() / b_scale) < self.tol {
                converged = true;
                break;
            }
        }
        SubproblemOutcome {
            x: st.x.clone(),
            inner_iters: iters,
            converged,
            state: st,
        }
    }
}

fn splitting<'a>(problem: &'a RecoveryProblem, config: &SolverConfig) -> Splitting<'a> {
    let beta = if problem.eps == 0.0 { config.rho } else { config.beta };
    Splitting {
        problem,
        rho: config.rho,
        beta,
        eta: config.eta_factor * config.rho * problem.lipschitz(),
        tol: config.inner_tol,
        max_iter: config.inner_max_iter,
    }
}

/// Approximately solves `min ‖x‖₁² − 2α⟨c, x⟩ s.t. ‖Ax − b‖₂ ≤ ε` by AD-LPMM.
///
/// Starts from `warm` when given, otherwise from `x = c`. Stops when both the
/// relative step `‖Δx‖/max(1,‖x‖)` and the scaled coupling residual
/// `‖Ax − z‖/max(1,‖b‖)` fall below `inner_tol`, or after `inner_max_iter`
/// iterations (reported through `converged = false`).
pub fn adlpmm_subproblem(
    problem: &RecoveryProblem,
    alpha: f64,
    c: &[f64],
    config: &SolverConfig,
    warm: Option<&AdlpmmState>,
) -> Result<SubproblemOutcome> {
    config.validate()?;
    if !(alpha >= 0.0) {
        return Err(Error::InvalidArgument(format!("alpha must be >= 0, got {alpha}")));
    }
    if c.len() != problem.n() {
        return Err(Error::Dimension(format!(
            "anchor has length {}, expected {}",
            c.len(),
            problem.n()
        )));
    }
    let state = match warm {
        Some(s) => s.clone(),
        None => AdlpmmState::from_point(problem, c),
    };
    Ok(splitting(problem, config).run(Regularizer::SquaredL1 { alpha }, Some(c), state))
}

/// Dinkelbach iteration with linearized subproblems.
///
/// Starting from a feasible nonzero `x0`, sets `α⁽⁰⁾ = τ₂(x0)` and repeats:
/// solve the subproblem anchored at `c = x⁽ᵏ⁾` (warm-started from the
/// previous inner state), pull the result back onto the feasible set, and
/// update `α⁽ᵏ⁺¹⁾ = τ₂(x⁽ᵏ⁺¹⁾)`. Stops when
/// `‖x⁽ᵏ⁺¹⁾ − x⁽ᵏ⁾‖/max(1,‖x⁽ᵏ⁾‖) < outer_tol` or after `outer_max_iter`
/// steps.
pub fn dinkelbach_solve(problem: &RecoveryProblem, x0: &[f64], config: &SolverConfig) -> Result<SolverResult> {
    config.validate()?;
    if x0.len() != problem.n() {
        return Err(Error::Dimension(format!(
            "initial point has length {}, expected {}",
            x0.len(),
            problem.n()
        )));
    }
    if norm_l1(x0) == 0.0 {
        return Err(Error::ZeroVector("initial point"));
    }
    let r0 = problem.residual(x0);
    if r0 > problem.eps + 1e-8 * problem.b_scale() {
        return Err(Error::Infeasible(format!(
            "initial point residual {r0:.3e} exceeds budget {:.3e}",
            problem.eps
        )));
    }

    let split = splitting(problem, config);
    let cap = config.outer_cap(problem.n());
    let mut x = x0.to_vec();
    let mut alpha = tau2(&x)?;
    let mut result = SolverResult {
        x: Vec::new(),
        alpha_trace: vec![alpha],
        dinkelbach_trace: Vec::new(),
        norm_trace: vec![norm_l2(&x)],
        step_trace: Vec::new(),
        outer_iters: 0,
        inner_iters_total: 0,
        status: Status::MaxIter,
        feasibility_residual: 0.0,
    };
    let mut state = AdlpmmState::from_point(problem, &x);

    for _ in 0..cap {
        let out = split.run(Regularizer::SquaredL1 { alpha }, Some(&x), state);
        result.outer_iters += 1;
        result.inner_iters_total += out.inner_iters;
        state = out.state;

        let mut x_new = out.x;
        problem.restore_feasibility(&mut x_new)?;
        if norm_l1(&x_new) == 0.0 {
            result.status = Status::Degenerate;
            break;
        }

        // keep the step only if it does not increase the subproblem objective;
        // at x⁽ᵏ⁾ that objective equals −α‖x⁽ᵏ⁾‖₂²
        if linearized_objective(&x_new, alpha, &x) > -alpha * norm_l2_sq(&x) {
            result.status = Status::Converged;
            break;
        }
        let l1 = norm_l1(&x_new);
        let l2sq = norm_l2_sq(&x_new);
        result.dinkelbach_trace.push(l1 * l1 - alpha * l2sq);
        let alpha_new = tau2(&x_new)?;

        let dx = norm_l2(&sub(&x_new, &x));
        let step = dx / norm_l2(&x).max(1.0);
        x = x_new;
        alpha = alpha_new;
        result.alpha_trace.push(alpha);
        result.norm_trace.push(l2sq.sqrt());
        result.step_trace.push(dx);
        if step < config.outer_tol {
            result.status = Status::Converged;
            break;
        }
    }

    result.feasibility_residual = problem.residual(&x);
    result.x = x;
    Ok(result)
}

/// ρ used by the ℓ1 initializer after normalizing `b` to unit length.
pub const L1_RHO: f64 = 10.0;

/// Approximate `min ‖x‖₁ s.t. ‖Ax − b‖₂ ≤ ε` with the same splitting, using
/// soft thresholding as the proximal step.
///
/// The problem is rescaled so that `‖b‖₂ = 1` before iterating, which makes
/// the result independent of the overall signal scale. The returned point is
/// pulled back onto the feasible set.
pub fn l1_initializer(problem: &RecoveryProblem, tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    l1_initializer_with(problem, L1_RHO, tol, max_iter)
}

pub fn l1_initializer_with(problem: &RecoveryProblem, rho: f64, tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    if !(rho > 0.0 && tol > 0.0) {
        return Err(Error::InvalidArgument("rho and tol must be positive".into()));
    }
    let s = norm_l2(&problem.b);
    let scaled = RecoveryProblem {
        a: problem.a.clone(),
        b: problem.b.iter().map(|v| v / s).collect(),
        eps: problem.eps / s,
        lipschitz: problem.lipschitz.clone(),
        least_norm: problem.least_norm.clone(),
    };
    let split = Splitting {
        problem: &scaled,
        rho,
        beta: rho,
        eta: rho * scaled.lipschitz(),
        tol,
        max_iter,
    };
    // start from the least-norm point, a feasible and usually dense guess
    let start = scaled.least_norm_point()?;
    let out = split.run(Regularizer::L1, None, AdlpmmState::from_point(&scaled, &start));
    let mut x: Vec<f64> = out.x.iter().map(|v| v * s).collect();
    problem.restore_feasibility(&mut x)?;
    Ok(x)
}

/// Feasible starting point for `ε > 0` built from an ℓ1 estimate.
///
/// Returns `x_l1` when it already satisfies the constraint, otherwise
/// `A†b + ε(x_l1 − A†b)/‖Ax_l1 − b‖₂`.
pub fn noisy_initial_point(problem: &RecoveryProblem, x_l1: &[f64]) -> Result<Vec<f64>> {
    if x_l1.len() != problem.n() {
        return Err(Error::Dimension(format!(
            "point has length {}, expected {}",
            x_l1.len(),
            problem.n()
        )));
    }
    let r = problem.residual(x_l1);
    if r <= problem.eps {
        return Ok(x_l1.to_vec());
    }
    let center = problem.least_norm_point()?;
    let f = problem.eps / r;
    Ok(center.iter().zip(x_l1).map(|(c, x)| c + f * (x - c)).collect())
}

/// The full pipeline: ℓ1 initializer, the noisy correction when `ε > 0`,
/// then [`dinkelbach_solve`].
pub fn recover(problem: &RecoveryProblem, config: &SolverConfig) -> Result<SolverResult> {
    let x_l1 = l1_initializer(problem, 1e-8, config.inner_max_iter.max(1) * 2)?;
    let x0 = if problem.eps > 0.0 {
        noisy_initial_point(problem, &x_l1)?
    } else {
        x_l1
    };
    dinkelbach_solve(problem, &x0, config)
}

/// Subproblem objective `‖x‖₁² − 2α⟨c, x⟩`.
pub fn linearized_objective(x: &[f64], alpha: f64, c: &[f64]) -> f64 {
    let l1 = norm_l1(x);
    l1 * l1 - 2.0 * alpha * dot(c, x)
}
