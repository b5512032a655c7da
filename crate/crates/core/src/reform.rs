//! Quadratic-form view of the squared ratio and exact analysis of instances
//! whose kernel has dimension one or two.
//!
//! Writing `x = x₊ − x₋` with `v = [x₊; x₋] ≥ 0` turns
//! `‖x‖₁² − α‖x‖₂²` into `vᵀH(α)v` with
//!
//! ```text
//! H(α) = [ eeᵀ − αI   eeᵀ + αI ]
//!        [ eeᵀ + αI   eeᵀ − αI ]
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm_l1, norm_l2, norm_l2_sq, DenseMatrix, LeastNormSolver};
use crate::sensing::{stream_rng, Stream};
use crate::solver::RecoveryProblem;

/// Implicit `2n × 2n` matrix `H(α)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadForm {
    pub n: usize,
    pub alpha: f64,
}

pub fn build_h(n: usize, alpha: f64) -> QuadForm {
    QuadForm { n, alpha }
}

impl QuadForm {
    pub fn dim(&self) -> usize {
        2 * self.n
    }

    /// `H v` in `O(n)`.
    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.dim(), "vector length must be 2n");
        let n = self.n;
        let total: f64 = v.iter().sum();
        let mut out = vec![0.0; 2 * n];
        for i in 0..n {
            let d = self.alpha * (v[i] - v[n + i]);
            out[i] = total - d;
            out[n + i] = total + d;
        }
        out
    }

    /// `vᵀHv = (Σv)² − α‖v₊ − v₋‖₂²`
    pub fn quadratic(&self, v: &[f64]) -> f64 {
        assert_eq!(v.len(), self.dim(), "vector length must be 2n");
        let n = self.n;
        let total: f64 = v.iter().sum();
        let diff: f64 = (0..n).map(|i| (v[i] - v[n + i]).powi(2)).sum();
        total * total - self.alpha * diff
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let n = self.n;
        let mut h = DenseMatrix::zeros(2 * n, 2 * n);
        for i in 0..2 * n {
            for j in 0..2 * n {
                let mut v = 1.0;
                if i % n == j % n {
                    v += if (i < n) == (j < n) { -self.alpha } else { self.alpha };
                }
                h.set(i, j, v);
            }
        }
        h
    }
}

/// `v = [max(x,0); max(−x,0)]`
pub fn split_signs(x: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = x.iter().map(|t| t.max(0.0)).collect();
    v.extend(x.iter().map(|t| (-t).max(0.0)));
    v
}

/// Orthonormal DCT-II matrix: row `k` is `c_k cos(πk(2j+1)/(2n))`.
pub fn dct2_matrix(n: usize) -> DenseMatrix {
    let mut d = DenseMatrix::zeros(n, n);
    let nf = n as f64;
    for k in 0..n {
        let c = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
        for j in 0..n {
            let arg = std::f64::consts::PI * (k as f64) * (2.0 * j as f64 + 1.0) / (2.0 * nf);
            d.set(k, j, c * arg.cos());
        }
    }
    d
}

/// The sparse orthogonal mixing matrix pairing coordinates `k` and `n + k`.
pub fn mixing_matrix(n: usize) -> DenseMatrix {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut e = DenseMatrix::zeros(2 * n, 2 * n);
    e.set(0, 0, h);
    e.set(0, n, h);
    e.set(n, 0, h);
    e.set(n, n, -h);
    for k in 1..n {
        e.set(k, k, h);
        e.set(k, n + k, h);
        e.set(n + k, k, -h);
        e.set(n + k, n + k, h);
    }
    e
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub n: usize,
    pub alpha: f64,
    /// computed, nondecreasing
    pub eigenvalues: Vec<f64>,
    /// `{2n, −2α (×n), 0 (×(n−1))}`, nondecreasing
    pub expected: Vec<f64>,
    pub max_eigenvalue_error: f64,
    /// indices (into the sorted lists) whose error exceeds the tolerance
    pub deviating: Vec<usize>,
    /// `‖diag(Dᵀ,Dᵀ)·E·Λ·Eᵀ·diag(D,D) − H‖_max`: eigenvectors as columns of `diag(Dᵀ,Dᵀ)E`
    pub reconstruction_error_columns: f64,
    /// `‖diag(Dᵀ,Dᵀ)·Eᵀ·Λ·E·diag(D,D) − H‖_max`: the transposed reading
    pub reconstruction_error_rows: f64,
    pub tolerance: f64,
    pub passed: bool,
}

pub const SPECTRUM_TOLERANCE: f64 = 1e-8;

/// Materializes `H(α)`, compares its spectrum with `{2n, −2α, 0}` of
/// multiplicities `1, n, n−1`, and rebuilds `H` from the DCT/mixing-matrix
/// factorization under both transpose conventions.
pub fn verify_h_spectrum(n: usize, alpha: f64) -> Result<SpectrumReport> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("spectrum check needs n >= 2, got {n}")));
    }
    if !alpha.is_finite() {
        return Err(Error::InvalidArgument("alpha must be finite".into()));
    }
    let h = build_h(n, alpha).to_dense();
    let eigenvalues = h.symmetric_eigenvalues()?;
    let mut expected = vec![2.0 * n as f64];
    expected.extend(std::iter::repeat_n(-2.0 * alpha, n));
    expected.extend(std::iter::repeat_n(0.0, n - 1));
    // diagonal of Λ in the column order of E
    let lambda = expected.clone();
    expected.sort_by(f64::total_cmp);

    let errs: Vec<f64> = eigenvalues.iter().zip(&expected).map(|(a, b)| (a - b).abs()).collect();
    let max_eigenvalue_error = errs.iter().cloned().fold(0.0, f64::max);
    let deviating = errs
        .iter()
        .enumerate()
        .filter(|(_, e)| **e > SPECTRUM_TOLERANCE)
        .map(|(i, _)| i)
        .collect();

    let d = dct2_matrix(n);
    let mut dd_t = DenseMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            dd_t.set(i, j, d.get(j, i));
            dd_t.set(n + i, n + j, d.get(j, i));
        }
    }
    let e = mixing_matrix(n);
    let lam = DenseMatrix::from_diag(&lambda);
    let rebuild = |p: &DenseMatrix| -> Result<f64> {
        // diag(Dᵀ,Dᵀ) · P · Λ · Pᵀ · diag(D,D)
        let left = dd_t.matmul(p)?;
        let full = left.matmul(&lam)?.matmul(&left.transpose())?;
        Ok(full.max_abs_diff(&h))
    };
    let reconstruction_error_columns = rebuild(&e)?;
    let reconstruction_error_rows = rebuild(&e.transpose())?;

    let passed = max_eigenvalue_error <= SPECTRUM_TOLERANCE
        && reconstruction_error_columns.min(reconstruction_error_rows) <= SPECTRUM_TOLERANCE;
    Ok(SpectrumReport {
        n,
        alpha,
        eigenvalues,
        expected,
        max_eigenvalue_error,
        deviating,
        reconstruction_error_columns,
        reconstruction_error_rows,
        tolerance: SPECTRUM_TOLERANCE,
        passed,
    })
}

/// Reals in exports are written as decimal strings that parse back to the
/// same `f64`.
mod decimal {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn fmt(v: f64) -> String {
        format!("{v:?}")
    }

    fn parse<E: serde::de::Error>(s: &str) -> Result<f64, E> {
        s.trim().parse::<f64>().map_err(|_| E::custom(format!("not a decimal number: {s:?}")))
    }

    pub mod scalar {
        use super::*;
        pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
            s.serialize_str(&fmt(*v))
        }
        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
            parse(&String::deserialize(d)?)
        }
    }

    pub mod vector {
        use super::*;
        pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
            s.collect_seq(v.iter().map(|x| fmt(*x)))
        }
        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
            Vec::<String>::deserialize(d)?.iter().map(|s| parse(s)).collect()
        }
    }

    pub mod matrix {
        use super::*;
        pub fn serialize<S: Serializer>(v: &[Vec<f64>], s: S) -> Result<S::Ok, S::Error> {
            s.collect_seq(v.iter().map(|row| row.iter().map(|x| fmt(*x)).collect::<Vec<_>>()))
        }
        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<f64>>, D::Error> {
            let rows = Vec::<Vec<String>>::deserialize(d)?;
            let out: Result<Vec<Vec<f64>>, D::Error> =
                rows.iter().map(|r| r.iter().map(|s| parse(s)).collect()).collect();
            let out = out?;
            if let Some(w) = out.first().map(Vec::len) {
                if out.iter().any(|r| r.len() != w) {
                    return Err(D::Error::custom("ragged matrix"));
                }
            }
            Ok(out)
        }
    }
}

pub const QP_SCHEMA: &str = "tau2-qp/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QpMode {
    /// objective `vᵀH(α)v`, indefinite for `α > 0`
    ExactIndefinite,
    /// objective `vᵀH(0)v − 2α⟨[c; −c], v⟩`, convex
    LinearizedConvex,
}

/// Quadratic part `Q` of the objective.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum QuadraticTerm {
    /// `Q = [[J − γI, J + γI], [J + γI, J − γI]]` with `J` the all-ones `n × n` matrix
    OnesBlocks {
        n: usize,
        #[serde(with = "decimal::scalar")]
        gamma: f64,
    },
    /// row-major `2n × 2n`
    Dense {
        #[serde(with = "decimal::matrix")]
        rows: Vec<Vec<f64>>,
    },
}

impl QuadraticTerm {
    pub fn to_dense(&self) -> DenseMatrix {
        match self {
            QuadraticTerm::OnesBlocks { n, gamma } => build_h(*n, *gamma).to_dense(),
            QuadraticTerm::Dense { rows } => DenseMatrix::from_rows(rows).unwrap_or_else(|_| DenseMatrix::zeros(0, 0)),
        }
    }

    pub fn eval(&self, v: &[f64]) -> f64 {
        match self {
            QuadraticTerm::OnesBlocks { n, gamma } => build_h(*n, *gamma).quadratic(v),
            QuadraticTerm::Dense { rows } => rows.iter().zip(v).map(|(r, vi)| vi * dot(r, v)).sum(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QpObjective {
    /// always `"v^T Q v + l^T v"` (no factor one half)
    pub form: String,
    pub quadratic: QuadraticTerm,
    #[serde(with = "decimal::vector")]
    pub linear: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum QpConstraint {
    /// `C v = rhs` with `C = [A, −A]`
    AffineEquality {
        #[serde(with = "decimal::matrix")]
        matrix: Vec<Vec<f64>>,
        #[serde(with = "decimal::vector")]
        rhs: Vec<f64>,
    },
    /// `vᵀ[[G, −G], [−G, G]]v − 2⟨[Aᵀb; −Aᵀb], v⟩ + constant ≤ 0` with
    /// `G = AᵀA` and `constant = ‖b‖₂² − ε²`
    QuadraticBall {
        #[serde(with = "decimal::matrix")]
        gram: Vec<Vec<f64>>,
        #[serde(with = "decimal::vector")]
        atb: Vec<f64>,
        #[serde(with = "decimal::scalar")]
        constant: f64,
    },
}

impl QpConstraint {
    /// `‖Cv − rhs‖₂` for equalities, `max(0, lhs)` for the ball.
    pub fn violation(&self, v: &[f64]) -> f64 {
        match self {
            QpConstraint::AffineEquality { matrix, rhs } => {
                let r: Vec<f64> = matrix.iter().zip(rhs).map(|(row, b)| dot(row, v) - b).collect();
                norm_l2(&r)
            }
            QpConstraint::QuadraticBall { .. } => self.ball_lhs(v).unwrap_or(0.0).max(0.0),
        }
    }

    fn ball_lhs(&self, v: &[f64]) -> Option<f64> {
        let QpConstraint::QuadraticBall { gram, atb, constant } = self else {
            return None;
        };
        let n = atb.len();
        let x: Vec<f64> = (0..n).map(|i| v[i] - v[n + i]).collect();
        let gx: f64 = gram.iter().zip(&x).map(|(row, xi)| xi * dot(row, &x)).sum();
        Some(gx - 2.0 * dot(atb, &x) + constant)
    }
}

/// LCQP (`ε = 0`) or QCQP (`ε > 0`) over `v = [x₊; x₋] ≥ 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QpExport {
    pub schema: String,
    pub mode: QpMode,
    pub n: usize,
    #[serde(with = "decimal::scalar")]
    pub alpha: f64,
    pub objective: QpObjective,
    pub constraint: QpConstraint,
    pub nonnegative: bool,
}

impl QpExport {
    pub fn objective_value(&self, v: &[f64]) -> f64 {
        self.objective.quadratic.eval(v) + dot(&self.objective.linear, v)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let qp: QpExport = serde_json::from_str(text)?;
        if qp.schema != QP_SCHEMA {
            return Err(Error::Parse(format!("unsupported schema {:?}", qp.schema)));
        }
        Ok(qp)
    }

    /// Replaces the implicit quadratic term by its dense `2n × 2n` form.
    pub fn densify(&mut self) {
        if let QuadraticTerm::OnesBlocks { .. } = self.objective.quadratic {
            let d = self.objective.quadratic.to_dense();
            let rows = (0..d.rows()).map(|i| d.row(i).to_vec()).collect();
            self.objective.quadratic = QuadraticTerm::Dense { rows };
        }
    }
}

/// Assembles the reformulation of the problem at ratio `α`.
///
/// The linearized mode needs the anchor `c`; its objective
/// `vᵀH(0)v − 2α⟨[c; −c], v⟩` equals `‖x‖₁² − 2α⟨c, x⟩` on `v = [x₊; x₋]`.
pub fn export_qp(problem: &RecoveryProblem, alpha: f64, mode: QpMode, c: Option<&[f64]>) -> Result<QpExport> {
    let n = problem.n();
    if !alpha.is_finite() {
        return Err(Error::InvalidArgument("alpha must be finite".into()));
    }
    let (quadratic, linear) = match mode {
        QpMode::ExactIndefinite => (QuadraticTerm::OnesBlocks { n, gamma: alpha }, vec![0.0; 2 * n]),
        QpMode::LinearizedConvex => {
            let c = c.ok_or_else(|| Error::InvalidArgument("linearized export needs an anchor vector".into()))?;
            if c.len() != n {
                return Err(Error::Dimension(format!("anchor has length {}, expected {n}", c.len())));
            }
            let mut l: Vec<f64> = c.iter().map(|ci| -2.0 * alpha * ci).collect();
            l.extend(c.iter().map(|ci| 2.0 * alpha * ci));
            (QuadraticTerm::OnesBlocks { n, gamma: 0.0 }, l)
        }
    };
    let a = problem.a();
    let constraint = if problem.eps() == 0.0 {
        let matrix = (0..a.rows())
            .map(|i| {
                let r = a.row(i);
                let mut row = r.to_vec();
                row.extend(r.iter().map(|v| -v));
                row
            })
            .collect();
        QpConstraint::AffineEquality {
            matrix,
            rhs: problem.b().to_vec(),
        }
    } else {
        let g = a.gram();
        QpConstraint::QuadraticBall {
            gram: (0..n).map(|i| g.row(i).to_vec()).collect(),
            atb: a.tr_matvec(problem.b()),
            constant: norm_l2_sq(problem.b()) - problem.eps() * problem.eps(),
        }
    };
    Ok(QpExport {
        schema: QP_SCHEMA.to_string(),
        mode,
        n,
        alpha,
        objective: QpObjective {
            form: "v^T Q v + l^T v".to_string(),
            quadratic,
            linear,
        },
        constraint,
        nonnegative: true,
    })
}

/// Solution set `{x₀ + Σ tᵢ vᵢ}` of `Ax = b`.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelModel {
    /// orthonormal basis of `Ker(A)`
    pub basis: Vec<Vec<f64>>,
    /// particular solution orthogonal to `Ker(A)`
    pub x0: Vec<f64>,
}

impl KernelModel {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn n(&self) -> usize {
        self.x0.len()
    }

    /// `x₀ + Σ coeffs[i]·basis[i]`
    pub fn point(&self, coeffs: &[f64]) -> Vec<f64> {
        let mut x = self.x0.clone();
        for (c, v) in coeffs.iter().zip(&self.basis) {
            for (xi, vi) in x.iter_mut().zip(v) {
                *xi += c * vi;
            }
        }
        x
    }

    fn direction(&self, theta: f64) -> Vec<f64> {
        let (s, c) = theta.sin_cos();
        self.basis[0].iter().zip(&self.basis[1]).map(|(a, b)| c * a + s * b).collect()
    }
}

pub fn kernel_model(a: &DenseMatrix, b: &[f64]) -> Result<KernelModel> {
    if b.len() != a.rows() {
        return Err(Error::Dimension(format!("b has length {}, A has {} rows", b.len(), a.rows())));
    }
    let solver = LeastNormSolver::new(a);
    let x0 = solver.solve(b)?;
    let r: Vec<f64> = a.matvec(&x0).iter().zip(b).map(|(u, v)| u - v).collect();
    if norm_l2(&r) > 1e-8 * norm_l2(b).max(1.0) {
        return Err(Error::Infeasible("b is not in the range of A".into()));
    }
    Ok(KernelModel {
        basis: solver.kernel_basis(),
        x0,
    })
}

fn require_small_kernel(model: &KernelModel) -> Result<()> {
    match model.dim() {
        1 | 2 => Ok(()),
        0 => Err(Error::InvalidArgument("kernel is trivial; the ratio over it is undefined".into())),
        d => Err(Error::InvalidArgument(format!(
            "kernel dimension {d} is above 2; use alpha_star_sampled"
        ))),
    }
}

fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - g * (hi - lo);
    let mut d = lo + g * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    while hi - lo > tol {
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - g * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + g * (hi - lo);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Minimizes `h` over a uniform grid on `[0, π)` plus extra candidate angles,
/// then refines the best grid cell by golden-section search.
fn minimize_angle(h: impl Fn(f64) -> f64, points: usize, extra: &[f64]) -> (f64, f64) {
    let pi = std::f64::consts::PI;
    let points = points.max(8);
    let step = pi / points as f64;
    let mut best = (0.0, f64::INFINITY);
    for k in 0..points {
        let t = k as f64 * step;
        let v = h(t);
        if v < best.1 {
            best = (t, v);
        }
    }
    let refined = golden_min(&h, best.0 - step, best.0 + step, 1e-12);
    if refined.1 < best.1 {
        best = refined;
    }
    for &t in extra {
        let v = h(t);
        if v < best.1 {
            best = (t, v);
        }
    }
    best
}

/// Angles in `[0, π)` where some entry of `cosθ·v₁ + sinθ·v₂` vanishes.
fn kink_angles(model: &KernelModel) -> Vec<f64> {
    let pi = std::f64::consts::PI;
    model.basis[0]
        .iter()
        .zip(&model.basis[1])
        .filter(|(a, b)| a.abs() + b.abs() > 0.0)
        .map(|(a, b)| (-a).atan2(*b).rem_euclid(pi))
        .collect()
}

/// `α* = min ‖w‖₁²` over unit vectors `w ∈ Ker(A)`.
///
/// Exact for a one-dimensional kernel. For a plane the value is minimized
/// over a grid of `10⁵` angles refined by golden-section search, together
/// with every angle where an entry changes sign; since `‖cosθ·v₁ + sinθ·v₂‖₁`
/// is concave between such angles, the latter already contain the minimizer.
pub fn alpha_star_exact(model: &KernelModel) -> Result<f64> {
    require_small_kernel(model)?;
    if model.dim() == 1 {
        let l1 = norm_l1(&model.basis[0]);
        return Ok(l1 * l1);
    }
    let h = |t: f64| norm_l1(&model.direction(t)).powi(2);
    Ok(minimize_angle(h, 100_000, &kink_angles(model)).1)
}

/// Upper bound on `α*` for kernels of any dimension.
///
/// Each of `samples` random unit kernel vectors is improved by projected
/// subgradient steps on the sphere and then snapped to the nearby ray on
/// which `d − 1` entries vanish.
pub fn alpha_star_sampled(model: &KernelModel, samples: usize, seed: u64) -> Result<f64> {
    use rand_distr::{Distribution, StandardNormal};
    let d = model.dim();
    if d == 0 {
        return Err(Error::InvalidArgument("kernel is trivial; the ratio over it is undefined".into()));
    }
    let n = model.n();
    let w_of = |c: &[f64]| -> Vec<f64> {
        let mut w = vec![0.0; n];
        for (ci, v) in c.iter().zip(&model.basis) {
            for (wi, vi) in w.iter_mut().zip(v) {
                *wi += ci * vi;
            }
        }
        w
    };
    let value = |c: &[f64]| norm_l1(&w_of(c)).powi(2) / norm_l2_sq(c);
    let mut rng = stream_rng(seed, Stream::Solver);
    let mut best = f64::INFINITY;
    for _ in 0..samples.max(1) {
        let mut c: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = norm_l2(&c);
        if norm == 0.0 {
            continue;
        }
        c.iter_mut().for_each(|v| *v /= norm);
        let mut local = value(&c);
        let mut best_c = c.clone();
        for k in 0..100 {
            let w = w_of(&c);
            // subgradient of ‖Bc‖₁ in coefficient space, projected on the tangent plane
            let mut g: Vec<f64> = model.basis.iter().map(|v| dot(v, &w.iter().map(|t| t.signum()).collect::<Vec<_>>())).collect();
            let radial = dot(&g, &c);
            g.iter_mut().zip(&c).for_each(|(gi, ci)| *gi -= radial * ci);
            let gn = norm_l2(&g);
            if gn == 0.0 {
                break;
            }
            let step = 0.2 / (1.0 + k as f64);
            c.iter_mut().zip(&g).for_each(|(ci, gi)| *ci -= step * gi / gn);
            let cn = norm_l2(&c);
            c.iter_mut().for_each(|v| *v /= cn);
            let v = value(&c);
            if v < local {
                local = v;
                best_c = c.clone();
            }
        }
        if d > 1 {
            if let Some(v) = snap_to_ray(model, &w_of(&best_c)) {
                local = local.min(v);
            }
        }
        best = best.min(local);
    }
    Ok(best)
}

/// Value on the ray of `Ker(A)` where the `d − 1` smallest entries of `w`
/// vanish, when that ray is unique.
fn snap_to_ray(model: &KernelModel, w: &[f64]) -> Option<f64> {
    let d = model.dim();
    let mut idx: Vec<usize> = (0..w.len()).collect();
    idx.sort_by(|&i, &j| w[i].abs().total_cmp(&w[j].abs()));
    let rows: Vec<Vec<f64>> = idx[..d - 1]
        .iter()
        .map(|&i| model.basis.iter().map(|v| v[i]).collect())
        .collect();
    let sub = DenseMatrix::from_rows(&rows).ok()?;
    let ker = LeastNormSolver::new(&sub).kernel_basis();
    if ker.len() != 1 {
        return None;
    }
    let c = &ker[0];
    let mut u = vec![0.0; w.len()];
    for (ci, v) in c.iter().zip(&model.basis) {
        for (ui, vi) in u.iter_mut().zip(v) {
            *ui += ci * vi;
        }
    }
    Some(norm_l1(&u).powi(2) / norm_l2_sq(c))
}

/// The pieces of the line `x(t) = x₀ + t·u` on which every entry keeps its
/// sign: `‖x(t)‖₁ = p + q·t` on `[lo, hi]`.
struct LinePiece {
    lo: f64,
    hi: f64,
    p: f64,
    q: f64,
}

fn line_pieces(x0: &[f64], u: &[f64]) -> Vec<LinePiece> {
    // entries at rounding level are zeros of the exact direction; left in,
    // they would create a spurious last kink near t ~ 1e17
    let cut = 1e-12 * u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let u: Vec<f64> = u.iter().map(|v| if v.abs() <= cut { 0.0 } else { *v }).collect();
    let u = u.as_slice();
    let mut kinks: Vec<f64> = x0
        .iter()
        .zip(u)
        .filter(|(_, ui)| **ui != 0.0)
        .map(|(xi, ui)| -xi / ui)
        .collect();
    kinks.sort_by(f64::total_cmp);
    kinks.dedup();
    let mut bounds = vec![f64::NEG_INFINITY];
    bounds.extend(kinks);
    bounds.push(f64::INFINITY);
    bounds
        .windows(2)
        .map(|w| {
            let (lo, hi) = (w[0], w[1]);
            let mid = match (lo.is_finite(), hi.is_finite()) {
                (true, true) => 0.5 * (lo + hi),
                (false, true) => hi - 1.0,
                (true, false) => lo + 1.0,
                (false, false) => 0.0,
            };
            let (mut p, mut q) = (0.0, 0.0);
            for (xi, ui) in x0.iter().zip(u) {
                let s = (xi + mid * ui).signum();
                let s = if xi + mid * ui == 0.0 { 0.0 } else { s };
                p += s * xi;
                q += s * ui;
            }
            LinePiece { lo, hi, p, q }
        })
        .collect()
}

/// Outcome of minimizing a function along one line.
#[derive(Clone, Copy, Debug)]
struct LineMin {
    /// smallest value at a finite `t`
    value: f64,
    t: f64,
    /// `true` when the objective is unbounded below along the line
    unbounded: bool,
}

/// `min_t ‖x(t)‖₁² − α‖x(t)‖₂²`, exactly, using the sign pattern of each piece.
fn line_min_dinkelbach(x0: &[f64], u: &[f64], alpha: f64) -> LineMin {
    let c0 = norm_l2_sq(x0);
    let c1 = dot(x0, u);
    let c2 = norm_l2_sq(u);
    let mut best = LineMin {
        value: f64::INFINITY,
        t: 0.0,
        unbounded: false,
    };
    for piece in line_pieces(x0, u) {
        // a t² + b t + k
        let a = piece.q * piece.q - alpha * c2;
        let b = 2.0 * (piece.p * piece.q - alpha * c1);
        let k = piece.p * piece.p - alpha * c0;
        let f = |t: f64| (a * t + b) * t + k;
        let tol = 1e-9 * (piece.q * piece.q).max(alpha * c2).max(1.0);
        let flat = a.abs() <= tol;
        // escape to ±∞ on unbounded end pieces
        if !piece.hi.is_finite() && (a < -tol || (flat && b < 0.0)) {
            best.unbounded = true;
        }
        if !piece.lo.is_finite() && (a < -tol || (flat && b > 0.0)) {
            best.unbounded = true;
        }
        let mut cand = Vec::new();
        if piece.lo.is_finite() {
            cand.push(piece.lo);
        }
        if piece.hi.is_finite() {
            cand.push(piece.hi);
        }
        if a > tol {
            let t = -b / (2.0 * a);
            if t > piece.lo && t < piece.hi {
                cand.push(t);
            }
        }
        if cand.is_empty() {
            cand.push(0.0);
        }
        for t in cand {
            let v = f(t);
            if v < best.value {
                best.value = v;
                best.t = t;
            }
        }
    }
    best
}

/// `min_t τ₂(x(t))` over finite `t`, and the limit `q²/‖u‖²` at both ends.
fn line_min_ratio(x0: &[f64], u: &[f64]) -> (LineMin, f64) {
    let c0 = norm_l2_sq(x0);
    let c1 = dot(x0, u);
    let c2 = norm_l2_sq(u);
    let mut best = LineMin {
        value: f64::INFINITY,
        t: 0.0,
        unbounded: false,
    };
    let mut limit = f64::INFINITY;
    for piece in line_pieces(x0, u) {
        let ratio = |t: f64| {
            let l1 = piece.p + piece.q * t;
            let den = c0 + (2.0 * c1 + c2 * t) * t;
            if den <= 0.0 {
                f64::INFINITY
            } else {
                l1 * l1 / den
            }
        };
        if !piece.lo.is_finite() || !piece.hi.is_finite() {
            limit = limit.min(piece.q * piece.q / c2);
        }
        let mut cand = Vec::new();
        if piece.lo.is_finite() {
            cand.push(piece.lo);
        }
        if piece.hi.is_finite() {
            cand.push(piece.hi);
        }
        // stationary point: (q c₀ − p c₁) + (q c₁ − p c₂) t = 0
        let den = piece.q * c1 - piece.p * c2;
        if den != 0.0 {
            let t = (piece.p * c1 - piece.q * c0) / den;
            if t > piece.lo && t < piece.hi {
                cand.push(t);
            }
        }
        for t in cand {
            let v = ratio(t);
            if v < best.value {
                best.value = v;
                best.t = t;
            }
        }
    }
    (best, limit)
}

/// `F(α) = min ‖x‖₁² − α‖x‖₂²` over the solution set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FValue {
    /// `−∞` when unbounded
    pub value: f64,
    pub unbounded: bool,
    /// a minimizer when the value is finite
    pub argmin: Option<Vec<f64>>,
}

/// Evaluates `F(α)` on a kernel of dimension one or two.
///
/// Along any line through `x₀` the objective is a piecewise quadratic whose
/// pieces follow the sign pattern of `x(t)`, so each line is minimized exactly
/// and unboundedness is read off the leading coefficient `q² − α‖u‖²` of the
/// two end pieces (and the linear coefficient when that vanishes). A plane is
/// swept by lines through `x₀` at `theta_points` angles plus the angles where
/// an entry of the direction vanishes, with golden-section refinement.
pub fn eval_f_bruteforce(model: &KernelModel, alpha: f64, theta_points: usize) -> Result<FValue> {
    require_small_kernel(model)?;
    if !alpha.is_finite() {
        return Err(Error::InvalidArgument("alpha must be finite".into()));
    }
    let (best, dir) = if model.dim() == 1 {
        (line_min_dinkelbach(&model.x0, &model.basis[0], alpha), model.basis[0].clone())
    } else {
        let h = |t: f64| {
            let m = line_min_dinkelbach(&model.x0, &model.direction(t), alpha);
            if m.unbounded {
                f64::NEG_INFINITY
            } else {
                m.value
            }
        };
        let (theta, _) = minimize_angle(h, theta_points, &kink_angles(model));
        let u = model.direction(theta);
        (line_min_dinkelbach(&model.x0, &u, alpha), u)
    };
    if best.unbounded {
        return Ok(FValue {
            value: f64::NEG_INFINITY,
            unbounded: true,
            argmin: None,
        });
    }
    let x: Vec<f64> = model.x0.iter().zip(&dir).map(|(a, b)| a + best.t * b).collect();
    Ok(FValue {
        value: best.value,
        unbounded: false,
        argmin: Some(x),
    })
}

/// `ᾱ = inf τ₂(x)` over the solution set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaBar {
    pub value: f64,
    /// false when the infimum is only approached along an unbounded sequence
    pub attained: bool,
    /// the best finite point found
    pub best_point: Vec<f64>,
    /// `τ₂` at `best_point`
    pub best_finite: f64,
}

/// Computes `ᾱ` on a kernel of dimension one or two.
///
/// On each line `x₀ + t·u` the ratio is minimized exactly over finite `t`
/// (endpoints and the single stationary point of every piece); as `|t| → ∞`
/// it tends to `‖u‖₁²/‖u‖₂²`, whose minimum over directions is `α*`. The
/// infimum is attained iff the best finite value does not exceed `α*`.
pub fn alpha_bar_exact(model: &KernelModel) -> Result<AlphaBar> {
    require_small_kernel(model)?;
    if model.x0.iter().all(|v| *v == 0.0) {
        // the solution set is the kernel itself and τ₂ is scale invariant on it
        let a = alpha_star_exact(model)?;
        return Err(Error::InvalidArgument(format!(
            "b = 0: the solution set is a subspace (ratio infimum {a})"
        )));
    }
    let alpha_star = alpha_star_exact(model)?;
    let (finite, point) = if model.dim() == 1 {
        let (m, _) = line_min_ratio(&model.x0, &model.basis[0]);
        (m.value, model.point(&[m.t]))
    } else {
        let h = |t: f64| line_min_ratio(&model.x0, &model.direction(t)).0.value;
        let (theta, _) = minimize_angle(h, 100_000, &kink_angles(model));
        let u = model.direction(theta);
        let (m, _) = line_min_ratio(&model.x0, &u);
        let x: Vec<f64> = model.x0.iter().zip(&u).map(|(a, b)| a + m.t * b).collect();
        (m.value, x)
    };
    let tol = 1e-9 * alpha_star.max(1.0);
    let attained = finite < alpha_star - tol;
    Ok(AlphaBar {
        value: finite.min(alpha_star),
        attained,
        best_point: point,
        best_finite: finite,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphericalCheck {
    pub holds: bool,
    pub alpha_star: f64,
    /// false when `alpha_star` is only a sampled upper bound
    pub exact: bool,
}

/// Whether `α* ≥ m/s`. A trivial kernel satisfies it for every `s`.
pub fn spherical_bound_check(model: &KernelModel, m: usize, s: f64) -> SphericalCheck {
    let (alpha_star, exact) = match model.dim() {
        0 => (f64::INFINITY, true),
        1 | 2 => (alpha_star_exact(model).unwrap_or(f64::NAN), true),
        _ => (alpha_star_sampled(model, 1000, 0).unwrap_or(f64::NAN), false),
    };
    SphericalCheck {
        holds: alpha_star >= m as f64 / s,
        alpha_star,
        exact,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dinkelbach_value;
    use proptest::prelude::*;

    pub(crate) fn example1() -> (DenseMatrix, Vec<f64>) {
        let a = DenseMatrix::from_rows(&[
            [1.0, -1.0, 0.0, 0.0, 0.0, 0.0],
            [1.0, 0.0, -1.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, 1.0, 1.0, 0.0, 0.0],
            [2.0, 2.0, 0.0, 0.0, 1.0, 0.0],
            [1.0, 1.0, 0.0, 0.0, 0.0, -1.0],
        ])
        .unwrap();
        (a, vec![0.0, 0.0, 20.0, 40.0, 18.0])
    }

    pub(crate) fn example2() -> (DenseMatrix, Vec<f64>) {
        let a = DenseMatrix::from_rows(&[
            [1.0, -1.0, 0.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, 1.0, 1.0, 0.0, 0.0],
            [2.0, 2.0, 0.0, 0.0, 1.0, 0.0],
            [1.0, 1.0, 0.0, 0.0, 0.0, -1.0],
        ])
        .unwrap();
        (a, vec![0.0, 20.0, 40.0, 18.0])
    }

    #[test]
    fn quadratic_form_small_cases() {
        assert_eq!(build_h(1, 1.0).quadratic(&split_signs(&[3.0])), 0.0);
        assert_eq!(build_h(2, 1.0).quadratic(&split_signs(&[1.0, -1.0])), 2.0);
        let h = build_h(3, 0.7);
        let v = [0.3, -1.0, 2.0, 0.5, 0.1, -0.4];
        let dense = h.to_dense().matvec(&v);
        for (a, b) in h.matvec(&v).iter().zip(&dense) {
            assert!((a - b).abs() < 1e-14);
        }
        // symmetric stacks cancel α
        let u = [1.0, 2.0, 3.0];
        let stacked: Vec<f64> = u.iter().chain(&u).copied().collect();
        assert!(h.matvec(&stacked).iter().all(|v| (v - 12.0).abs() < 1e-14));
    }

    #[test]
    fn spectrum_small_cases() {
        let r = verify_h_spectrum(4, 2.0).unwrap();
        assert!(r.passed, "{r:?}");
        assert!(r.reconstruction_error_columns < 1e-12);
        assert!(r.reconstruction_error_rows > 1e-3);
        let zero = verify_h_spectrum(3, 0.0).unwrap();
        assert!(zero.passed);
        assert_eq!(zero.eigenvalues.iter().filter(|e| e.abs() > 1e-8).count(), 1);
        let tr = build_h(2, 2.0).to_dense();
        let trace: f64 = (0..4).map(|i| tr.get(i, i)).sum();
        assert!((trace - (4.0 - 8.0)).abs() < 1e-14);
        assert!(verify_h_spectrum(1, 1.0).is_err());
    }

    #[test]
    fn dct_is_orthogonal() {
        let d = dct2_matrix(7);
        let p = d.matmul(&d.transpose()).unwrap();
        assert!(p.max_abs_diff(&DenseMatrix::identity(7)) < 1e-13);
        // D e = √n e₁
        let de = d.matvec(&[1.0; 7]);
        assert!((de[0] - 7f64.sqrt()).abs() < 1e-13);
        assert!(de[1..].iter().all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn example1_kernel_and_exact_values() {
        let (a, b) = example1();
        let m = kernel_model(&a, &b).unwrap();
        assert_eq!(m.dim(), 1);
        let want = [1.0, 1.0, 1.0, -2.0, -4.0, 2.0].map(|v| v / 27f64.sqrt());
        let sgn = m.basis[0][0].signum();
        for (u, w) in m.basis[0].iter().zip(&want) {
            assert!((sgn * u - w).abs() < 1e-10);
        }
        assert!((alpha_star_exact(&m).unwrap() - 121.0 / 27.0).abs() < 1e-9);
        let bar = alpha_bar_exact(&m).unwrap();
        assert!((bar.value - 1521.0 / 581.0).abs() < 1e-6);
        assert!(bar.attained);
        let f = eval_f_bruteforce(&m, 121.0 / 27.0, 1000).unwrap();
        assert!(f.unbounded);
    }

    #[test]
    fn example2_kernel_and_exact_values() {
        let (a, b) = example2();
        let m = kernel_model(&a, &b).unwrap();
        assert_eq!(m.dim(), 2);
        let star = alpha_star_exact(&m).unwrap();
        assert!((star - 2.0).abs() < 1e-6);
        let bar = alpha_bar_exact(&m).unwrap();
        assert!((bar.value - 2.0).abs() < 1e-4);
        assert!(!bar.attained);
        let f = eval_f_bruteforce(&m, star, 10_000).unwrap();
        assert!(!f.unbounded && f.value.is_finite());
        assert!(alpha_star_sampled(&m, 10_000, 1).unwrap() <= 2.0 + 1e-4);
    }

    #[test]
    fn identity_has_trivial_kernel() {
        let m = kernel_model(&DenseMatrix::identity(3), &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(m.dim(), 0);
        assert_eq!(m.x0, vec![1.0, 2.0, 3.0]);
        assert!(alpha_star_exact(&m).is_err());
        assert!(spherical_bound_check(&m, 3, 1e-9).holds);
    }

    #[test]
    fn kernel_model_rejects_inconsistent_rhs() {
        let a = DenseMatrix::from_rows(&[[1.0, 1.0], [2.0, 2.0]]).unwrap();
        assert!(kernel_model(&a, &[1.0, 0.0]).is_err());
    }

    #[test]
    fn single_coordinate_kernel() {
        let a = DenseMatrix::from_rows(&[[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]).unwrap();
        let m = kernel_model(&a, &[1.0, 1.0]).unwrap();
        assert!((alpha_star_exact(&m).unwrap() - 1.0).abs() < 1e-12);
        assert!((alpha_star_sampled(&m, 3, 0).unwrap() - 1.0).abs() < 1e-12);
        // t = 0 is a candidate, so ᾱ ≤ τ₂(x₀) = 2
        assert!(alpha_bar_exact(&m).unwrap().value <= 2.0 + 1e-12);
    }

    #[test]
    fn spherical_bound_examples() {
        let (a, b) = example1();
        let m = kernel_model(&a, &b).unwrap();
        let c = spherical_bound_check(&m, 5, 2.0);
        assert!(c.holds && c.exact);
        assert!(spherical_bound_check(&m, 5, 1e12).holds);
        assert!(!spherical_bound_check(&m, 5, 1e-12).holds);
    }

    #[test]
    fn f_is_decreasing_below_alpha_star() {
        let (a, b) = example1();
        let m = kernel_model(&a, &b).unwrap();
        let star = alpha_star_exact(&m).unwrap();
        let mut prev = f64::INFINITY;
        for k in 0..20 {
            let alpha = 1.0 + (star - 1.0) * k as f64 / 20.0;
            let f = eval_f_bruteforce(&m, alpha, 100).unwrap();
            assert!(!f.unbounded);
            assert!(f.value < prev);
            prev = f.value;
        }
        assert!(eval_f_bruteforce(&m, 0.5, 100).unwrap().value >= 0.0);
    }

    #[test]
    fn exports_reproduce_the_objective_and_constraints() {
        let (a, b) = example1();
        let p = RecoveryProblem::new(a, b, 0.0).unwrap();
        let x = [0.0, 0.0, 0.0, 20.0, 40.0, -18.0];
        let v = split_signs(&x);
        let alpha = 2.5;
        let exact = export_qp(&p, alpha, QpMode::ExactIndefinite, None).unwrap();
        assert!((exact.objective_value(&v) - dinkelbach_value(&x, alpha)).abs() < 1e-10 * 6084.0);
        assert!(exact.constraint.violation(&v) < 1e-12);
        let lin = export_qp(&p, alpha, QpMode::LinearizedConvex, Some(&x)).unwrap();
        let want = 78.0 * 78.0 - 2.0 * alpha * norm_l2_sq(&x);
        assert!((lin.objective_value(&v) - want).abs() < 1e-10 * 6084.0);
        assert!(export_qp(&p, alpha, QpMode::LinearizedConvex, None).is_err());
    }

    #[test]
    fn ball_export_matches_the_residual() {
        let (a, b) = example1();
        let p = RecoveryProblem::new(a.clone(), b.clone(), 0.5).unwrap();
        let qp = export_qp(&p, 1.0, QpMode::ExactIndefinite, None).unwrap();
        let x = [0.1, 0.0, -0.2, 20.0, 40.0, -18.0];
        let r = norm_l2_sq(&a.matvec(&x).iter().zip(&b).map(|(u, v)| u - v).collect::<Vec<_>>());
        let lhs = qp.constraint.ball_lhs(&split_signs(&x)).unwrap();
        assert!((lhs - (r - 0.25)).abs() < 1e-9);
    }

    #[test]
    fn json_round_trip_is_lossless() {
        let (a, b) = example1();
        let p = RecoveryProblem::new(a, b, 0.3).unwrap();
        let c = [0.1, 1.0 / 3.0, -2.0, 1e-300, 7.0, 0.0];
        let mut qp = export_qp(&p, std::f64::consts::PI, QpMode::LinearizedConvex, Some(&c)).unwrap();
        let back = QpExport::from_json(&qp.to_json().unwrap()).unwrap();
        assert_eq!(back, qp);
        qp.densify();
        let text = qp.to_json().unwrap();
        assert!(text.contains("\"tau2-qp/1\""));
        assert_eq!(QpExport::from_json(&text).unwrap(), qp);
        assert!(QpExport::from_json(&text.replace("tau2-qp/1", "tau2-qp/9")).is_err());
    }

    proptest! {
        #[test]
        fn quadratic_identity(x in prop::collection::vec(-50.0f64..50.0, 1..20), alpha in 0.0f64..30.0) {
            let h = build_h(x.len(), alpha);
            let lhs = h.quadratic(&split_signs(&x));
            let rhs = dinkelbach_value(&x, alpha);
            prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + norm_l1(&x).powi(2)));
        }

    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn alpha_bar_never_exceeds_alpha_star(seed in 0u64..40) {
            use rand::Rng;
            let mut rng = stream_rng(seed, Stream::Matrix);
            let rows: Vec<Vec<f64>> = (0..4).map(|_| (0..6).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
            let a = DenseMatrix::from_rows(&rows).unwrap();
            let xt: Vec<f64> = (0..6).map(|_| rng.random_range(-2.0..2.0)).collect();
            let m = kernel_model(&a, &a.matvec(&xt)).unwrap();
            prop_assert_eq!(m.dim(), 2);
            let bar = alpha_bar_exact(&m).unwrap();
            prop_assert!(bar.value <= alpha_star_exact(&m).unwrap() + 1e-12);
            prop_assert!(bar.value >= 1.0 - 1e-12);
        }
    }
}
