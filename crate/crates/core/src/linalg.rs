//! Dense linear algebra, norms and effective-sparsity measures.
//!
//! Vectors are plain `Vec<f64>` / `&[f64]`. Matrices are stored row-major in
//! [`DenseMatrix`]. Everything here is pure and allocation-light so it can be
//! shared freely between worker threads.

use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Row-major dense real matrix with finite entries.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        check_finite(&data)?;
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diag(&vec![1.0; n])
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * n + i] = d;
        }
        m
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::Dimension(format!(
                    "row {i} has {} entries, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.cols + j] = value;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    /// `A x`
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        self.matvec_into(x, &mut out);
        out
    }

    pub fn matvec_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.cols.max(1))) {
            *o = dot(row, x);
        }
    }

    /// `Aᵀ y`
    pub fn tr_matvec(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        self.tr_matvec_into(y, &mut out);
        out
    }

    pub fn tr_matvec_into(&self, y: &[f64], out: &mut [f64]) {
        debug_assert_eq!(y.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        out.iter_mut().for_each(|o| *o = 0.0);
        for (&yi, row) in y.iter().zip(self.data.chunks_exact(self.cols.max(1))) {
            if yi != 0.0 {
                axpy(yi, row, out);
            }
        }
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.get(i, j);
            }
        }
        t
    }

    /// `AᵀA` as a dense `cols x cols` matrix.
    pub fn gram(&self) -> Self {
        let n = self.cols;
        let mut g = Self::zeros(n, n);
        for row in self.data.chunks_exact(n.max(1)) {
            for (i, &ri) in row.iter().enumerate() {
                if ri == 0.0 {
                    continue;
                }
                axpy(ri, row, &mut g.data[i * n..(i + 1) * n]);
            }
        }
        g
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a != 0.0 {
                    axpy(a, other.row(k), out_row);
                }
            }
        }
        Ok(out)
    }

    /// Largest absolute entry difference against another matrix of the same shape.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub(crate) fn to_nalgebra(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    /// Eigenvalues of a symmetric matrix in nondecreasing order. Only the
    /// lower triangle is read.
    pub fn symmetric_eigenvalues(&self) -> Result<Vec<f64>> {
        if self.rows != self.cols {
            return Err(Error::Dimension(format!("{}x{} matrix is not square", self.rows, self.cols)));
        }
        let mut e: Vec<f64> = nalgebra::SymmetricEigen::new(self.to_nalgebra())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        e.sort_by(f64::total_cmp);
        Ok(e)
    }

    /// Singular values in nonincreasing order.
    pub fn singular_values(&self) -> Vec<f64> {
        let mut s: Vec<f64> = self.to_nalgebra().singular_values().iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        s
    }
}

pub(crate) fn check_finite(v: &[f64]) -> Result<()> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(Error::NonFinite(i)),
        None => Ok(()),
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y += a * x`
#[inline]
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn scale(a: f64, x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| a * v).collect()
}

pub fn norm_l1(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}

pub fn norm_l2(x: &[f64]) -> f64 {
    let sq = dot(x, x);
    if sq.is_normal() {
        return sq.sqrt();
    }
    // overflowed or underflowed: rescale by the largest magnitude
    let big = norm_inf(x);
    if big == 0.0 || !big.is_finite() {
        return big;
    }
    let s: f64 = x.iter().map(|v| (v / big) * (v / big)).sum();
    big * s.sqrt()
}

pub fn norm_l2_sq(x: &[f64]) -> f64 {
    dot(x, x)
}

pub fn norm_inf(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn l0(x: &[f64]) -> usize {
    x.iter().filter(|v| **v != 0.0).count()
}

/// Effective sparsity `τ_q(x) = (‖x‖_q / ‖x‖₁)^{q/(1-q)}`.
///
/// Only `q ∈ (0, ∞) \ {1}` is supported; the limiting orders 0, 1 and ∞ are
/// not implemented.
pub fn tau_q(x: &[f64], q: f64) -> Result<f64> {
    if !(q > 0.0 && q.is_finite() && q != 1.0) {
        return Err(Error::InvalidArgument(format!(
            "order q must lie in (0, inf) without 1, got {q}"
        )));
    }
    let l1 = norm_l1(x);
    if l1 == 0.0 {
        return Err(Error::ZeroVector("effective sparsity"));
    }
    if q == 2.0 {
        let sq = norm_l2_sq(x);
        if sq.is_normal() && (l1 * l1).is_finite() {
            return Ok(l1 * l1 / sq);
        }
        let r = l1 / norm_l2(x);
        return Ok(r * r);
    }
    // sum of pi_i^q with pi = |x| / ‖x‖₁, then exp of the Rényi entropy
    let s: f64 = x.iter().map(|v| (v.abs() / l1).powf(q)).sum();
    Ok(s.powf(1.0 / (1.0 - q)))
}

/// `τ₂(x) = ‖x‖₁² / ‖x‖₂²`.
pub fn tau2(x: &[f64]) -> Result<f64> {
    tau_q(x, 2.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SparsityReport {
    pub l0: usize,
    pub l1: f64,
    pub l2: f64,
    pub tau2: f64,
    pub l1_over_l2: f64,
}

pub fn sparsity_report(x: &[f64]) -> Result<SparsityReport> {
    let l1 = norm_l1(x);
    let l2 = norm_l2(x);
    if l2 == 0.0 {
        return Err(Error::ZeroVector("sparsity report"));
    }
    let ratio = l1 / l2;
    Ok(SparsityReport {
        l0: l0(x),
        l1,
        l2,
        tau2: ratio * ratio,
        l1_over_l2: ratio,
    })
}

/// `Φ(x) = τ₂(x) · x`
pub fn phi_map(x: &[f64]) -> Result<Vec<f64>> {
    let t = tau2(x).map_err(|_| Error::ZeroVector("phi map"))?;
    Ok(scale(t, x))
}

/// `‖x‖₁² − α‖x‖₂²`
pub fn dinkelbach_value(x: &[f64], alpha: f64) -> f64 {
    let l1 = norm_l1(x);
    l1 * l1 - alpha * norm_l2_sq(x)
}

/// Largest eigenvalue of `AᵀA` by power iteration on the Gram operator.
///
/// Stops once the eigen-residual `‖AᵀAv − λv‖₂` drops below `tol · λ`. The
/// start vector is a fixed-seed Gaussian draw so repeated calls agree bit for
/// bit. Iterates on whichever of `AᵀA` / `AAᵀ` is smaller; both share the
/// same nonzero spectrum.
pub fn lambda_max_gram(a: &DenseMatrix, tol: f64, max_iter: usize) -> Result<f64> {
    if a.is_zero() {
        return Err(Error::InvalidArgument("zero matrix has no dominant eigenvalue".into()));
    }
    let wide = a.rows() < a.cols();
    let dim = if wide { a.rows() } else { a.cols() };
    let apply = |v: &[f64]| -> Vec<f64> {
        if wide {
            a.matvec(&a.tr_matvec(v))
        } else {
            a.tr_matvec(&a.matvec(v))
        }
    };

    let mut rng = ChaCha20Rng::seed_from_u64(0x5eed_1a3b_da7a);
    let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    let nv = norm_l2(&v);
    v.iter_mut().for_each(|x| *x /= nv);

    let mut lambda = 0.0;
    for _ in 0..max_iter {
        let w = apply(&v);
        lambda = dot(&v, &w);
        let resid: f64 = w
            .iter()
            .zip(&v)
            .map(|(wi, vi)| (wi - lambda * vi).powi(2))
            .sum::<f64>()
            .sqrt();
        let nw = norm_l2(&w);
        if nw == 0.0 {
            // start vector fell in the kernel; the Rayleigh quotient is 0
            return Err(Error::NoConvergence { iterations: 0, estimate: 0.0 });
        }
        if resid <= tol * lambda.abs() {
            return Ok(lambda);
        }
        v = w.into_iter().map(|x| x / nw).collect();
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        estimate: lambda,
    })
}

/// Householder reflector `I − τ v vᵀ` acting on trailing coordinates `start..`.
#[derive(Clone, Debug)]
struct Reflector {
    start: usize,
    v: Vec<f64>,
    tau: f64,
}

impl Reflector {
    fn apply(&self, x: &mut [f64]) {
        let tail = &mut x[self.start..];
        let s = self.tau * dot(&self.v, tail);
        axpy(-s, &self.v, tail);
    }
}

/// Builds a reflector mapping `x` onto `beta·e₁`; returns `(reflector, beta)`.
fn householder(x: &[f64], start: usize) -> (Reflector, f64) {
    let norm = norm_l2(x);
    if norm == 0.0 {
        return (
            Reflector {
                start,
                v: vec![0.0; x.len()],
                tau: 0.0,
            },
            0.0,
        );
    }
    let beta = if x[0] >= 0.0 { -norm } else { norm };
    let mut v = x.to_vec();
    v[0] -= beta;
    let vv = norm_l2_sq(&v);
    let tau = if vv == 0.0 { 0.0 } else { 2.0 / vv };
    (Reflector { start, v, tau }, beta)
}

/// Least-squares / least-norm solver for a fixed matrix `A`.
///
/// Factors `AᵀΠ = QR` with column pivoting (columns of `Aᵀ` are rows of `A`)
/// and truncates at the numerical rank `r`, the number of diagonal entries of
/// `R` above `1e-10 · |R₀₀|`. The minimum-norm least-squares point is then
/// `x = Q₁y` with `y = argmin ‖R₁ᵀy − Πᵀb‖`, which lies in the row space of
/// `A` and is therefore orthogonal to `Ker(A)`. Rank-deficient matrices are
/// handled without error.
#[derive(Clone, Debug)]
pub struct LeastNormSolver {
    m: usize,
    n: usize,
    rank: usize,
    reflectors: Vec<Reflector>,
    /// `perm[k]` is the row of `A` that ended up in pivot position `k`.
    perm: Vec<usize>,
    /// Leading `rank x m` block of `R`, row-major.
    r: Vec<f64>,
    /// Reflectors of a QR of `R₁ᵀ` (`m x rank`), present when `rank < m`.
    tail_qr: Option<SmallQr>,
}

#[derive(Clone, Debug)]
struct SmallQr {
    reflectors: Vec<Reflector>,
    /// upper triangular `rank x rank`, row-major
    r: Vec<f64>,
}

pub const RANK_TOLERANCE: f64 = 1e-10;

impl LeastNormSolver {
    pub fn new(a: &DenseMatrix) -> Self {
        let m = a.rows();
        let n = a.cols();
        // work on Aᵀ column by column: column k of Aᵀ is row k of A
        let mut cols: Vec<Vec<f64>> = (0..m).map(|i| a.row(i).to_vec()).collect();
        let mut perm: Vec<usize> = (0..m).collect();
        let steps = m.min(n);
        let mut reflectors = Vec::with_capacity(steps);
        let mut diag = Vec::with_capacity(steps);

        for k in 0..steps {
            let (pivot, _) = (k..m)
                .map(|j| (j, norm_l2_sq(&cols[j][k..])))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            cols.swap(k, pivot);
            perm.swap(k, pivot);
            let (h, beta) = householder(&cols[k][k..], k);
            for col in cols.iter_mut().skip(k + 1) {
                h.apply(col);
            }
            cols[k][k] = beta;
            for v in cols[k][k + 1..].iter_mut() {
                *v = 0.0;
            }
            diag.push(beta.abs());
            reflectors.push(h);
        }

        let lead = diag.first().copied().unwrap_or(0.0);
        let rank = diag.iter().take_while(|&&d| d > RANK_TOLERANCE * lead && d > 0.0).count();

        // R[i][j] = cols[j][i] for i < rank
        let mut r = vec![0.0; rank * m];
        for i in 0..rank {
            for j in 0..m {
                r[i * m + j] = cols[j][i];
            }
        }

        let tail_qr = (rank < m && rank > 0).then(|| {
            // columns of R₁ᵀ (m x rank) are rows of R₁
            let mut c: Vec<Vec<f64>> = (0..rank).map(|i| r[i * m..(i + 1) * m].to_vec()).collect();
            let mut refl = Vec::with_capacity(rank);
            for k in 0..rank {
                let (h, beta) = householder(&c[k][k..], k);
                for col in c.iter_mut().skip(k + 1) {
                    h.apply(col);
                }
                c[k][k] = beta;
                refl.push(h);
            }
            let mut rr = vec![0.0; rank * rank];
            for i in 0..rank {
                for j in i..rank {
                    rr[i * rank + j] = c[j][i];
                }
            }
            SmallQr { reflectors: refl, r: rr }
        });

        reflectors.truncate(steps);
        Self {
            m,
            n,
            rank,
            reflectors,
            perm,
            r,
            tail_qr,
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Minimum-norm minimizer of `‖Ax − b‖₂`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.m {
            return Err(Error::Dimension(format!(
                "right-hand side has length {}, expected {}",
                b.len(),
                self.m
            )));
        }
        let r = self.rank;
        let mut x = vec![0.0; self.n];
        if r == 0 {
            return Ok(x);
        }
        let pb: Vec<f64> = self.perm.iter().map(|&i| b[i]).collect();
        let m = self.m;

        let y = match &self.tail_qr {
            None => {
                // R₁₁ᵀ y = (Πᵀb)[..r], forward substitution on a lower-triangular system
                let mut y = vec![0.0; r];
                for i in 0..r {
                    let mut s = pb[i];
                    for (k, yk) in y.iter().enumerate().take(i) {
                        s -= self.r[k * m + i] * yk;
                    }
                    y[i] = s / self.r[i * m + i];
                }
                y
            }
            Some(qr) => {
                let mut c = pb;
                for h in &qr.reflectors {
                    h.apply(&mut c);
                }
                let mut y = vec![0.0; r];
                for i in (0..r).rev() {
                    let mut s = c[i];
                    for (k, yk) in y.iter().enumerate().skip(i + 1) {
                        s -= qr.r[i * r + k] * yk;
                    }
                    y[i] = s / qr.r[i * r + i];
                }
                y
            }
        };

        x[..r].copy_from_slice(&y);
        // x = Q [y; 0] = H_0 H_1 ... H_{p-1} [y; 0]
        for h in self.reflectors.iter().rev() {
            h.apply(&mut x);
        }
        Ok(x)
    }

    /// Orthonormal basis of `Ker(A)`: the trailing `n − rank` columns of `Q`.
    pub fn kernel_basis(&self) -> Vec<Vec<f64>> {
        (self.rank..self.n)
            .map(|j| {
                let mut e = vec![0.0; self.n];
                e[j] = 1.0;
                for h in self.reflectors.iter().rev() {
                    h.apply(&mut e);
                }
                e
            })
            .collect()
    }
}

/// Minimum-norm least-squares solution of `Ax ≈ b`.
///
/// `tol` is accepted for interface symmetry and validated; the rank cut-off is
/// fixed at [`RANK_TOLERANCE`] relative to the leading pivot.
pub fn least_norm_solution(a: &DenseMatrix, b: &[f64], tol: f64) -> Result<Vec<f64>> {
    if !(tol >= 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be nonnegative, got {tol}")));
    }
    LeastNormSolver::new(a).solve(b)
}

/// Writes a matrix as headerless CSV, one row per line.
pub fn write_matrix_csv(path: impl AsRef<Path>, a: &DenseMatrix) -> Result<()> {
    let mut s = String::with_capacity(a.rows() * a.cols() * 20);
    for i in 0..a.rows() {
        for (j, v) in a.row(i).iter().enumerate() {
            if j > 0 {
                s.push(',');
            }
            let _ = write!(s, "{v:?}");
        }
        s.push('\n');
    }
    std::fs::write(path, s)?;
    Ok(())
}

/// Writes a vector as a headerless single-column CSV.
pub fn write_vector_csv(path: impl AsRef<Path>, x: &[f64]) -> Result<()> {
    let mut s = String::with_capacity(x.len() * 20);
    for v in x {
        let _ = writeln!(s, "{v:?}");
    }
    std::fs::write(path, s)?;
    Ok(())
}

pub fn parse_matrix_csv(text: &str) -> Result<DenseMatrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}: {f:?}", lineno + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    DenseMatrix::from_rows(&rows)
}

pub fn read_matrix_csv(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    parse_matrix_csv(&std::fs::read_to_string(path)?)
}

/// Reads a vector stored either as a single column or a single row.
pub fn read_vector_csv(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let m = read_matrix_csv(path)?;
    if m.cols() == 1 || m.rows() == 1 {
        Ok(m.as_slice().to_vec())
    } else {
        Err(Error::Dimension(format!(
            "expected a vector, found a {}x{} table",
            m.rows(),
            m.cols()
        )))
    }
}
