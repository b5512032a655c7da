//! Sparse signal recovery by minimizing the squared ℓ1/ℓ2 ratio
//! `τ₂(x) = ‖x‖₁² / ‖x‖₂²` subject to `‖Ax − b‖₂ ≤ ε`.
//!
//! The solver runs Dinkelbach's procedure with a linearized subproblem,
//! each solved by an alternating direction linearized proximal method of
//! multipliers (AD-LPMM). Around it sit:
//!
//! - [`linalg`]: dense matrices, norms, effective sparsity, the `Φ` map,
//!   power iteration and least-norm solves;
//! - [`prox`]: proximity operators of `β‖·‖₁²`, `t‖·‖₁` and the ε-ball;
//! - [`sensing`]: oversampled DCT / correlated Gaussian / rank-deficient
//!   sensing matrices, separated sparse signals and noisy measurements;
//! - [`solver`]: the AD-LPMM inner loop, the Dinkelbach outer loop and the
//!   ℓ1 / noisy initializers;
//! - [`reform`]: the indefinite quadratic form `H(α)`, QP exports, and
//!   small-kernel analysis (`α*`, `ᾱ`, brute-force `F(α)`);
//! - [`harness`]: seeded experiment sweeps, success rates and the built-in
//!   verification suite;
//! - [`cli`]: the command implementations behind the `tau2` binary.

pub mod cli;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod prox;
pub mod reform;
pub mod sensing;
pub mod solver;

pub use error::{Error, Result};
pub use linalg::DenseMatrix;
