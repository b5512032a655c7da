//! Sensing matrices, sparse ground-truth signals and measurements.
//!
//! Every generator is a pure function of its spec and seed. Randomness comes
//! from ChaCha20 keyed by the seed, with a separate stream per consumer
//! (matrix, then signal, then noise), so a trial's matrix does not change
//! when the signal model does and parallel workers never share state.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm_l2, DenseMatrix};

/// Independent random streams derived from one seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Matrix = 1,
    Signal = 2,
    Noise = 3,
    Solver = 4,
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

fn normal(rng: &mut impl Rng) -> f64 {
    StandardNormal.sample(rng)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatrixFamily {
    OversampledDct,
    CorrelatedGaussian,
    RankDeficientDct,
}

/// How extra rows of a rank-deficient matrix are produced.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Augmentation {
    /// exact copies of randomly selected base rows
    #[default]
    Copy,
    /// Gaussian-weighted combinations of randomly selected base rows
    Combine,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixSpec {
    pub family: MatrixFamily,
    /// Rows (the base row count for rank-deficient matrices).
    pub m: usize,
    pub n: usize,
    /// DCT coherence parameter `E`.
    #[serde(default = "one", alias = "E")]
    pub coherence: f64,
    /// Gaussian correlation `r`.
    #[serde(default, alias = "r")]
    pub correlation: f64,
    #[serde(default)]
    pub extra_rows: usize,
    #[serde(default)]
    pub augmentation: Augmentation,
    #[serde(default)]
    pub seed: u64,
}

impl MatrixSpec {
    pub fn dct(m: usize, n: usize, coherence: f64, seed: u64) -> Self {
        Self {
            family: MatrixFamily::OversampledDct,
            m,
            n,
            coherence,
            correlation: 0.0,
            extra_rows: 0,
            augmentation: Augmentation::Copy,
            seed,
        }
    }

    pub fn gaussian(m: usize, n: usize, correlation: f64, seed: u64) -> Self {
        Self {
            family: MatrixFamily::CorrelatedGaussian,
            correlation,
            coherence: 1.0,
            ..Self::dct(m, n, 1.0, seed)
        }
    }

    pub fn rank_deficient(
        m: usize,
        n: usize,
        coherence: f64,
        extra_rows: usize,
        augmentation: Augmentation,
        seed: u64,
    ) -> Self {
        Self {
            family: MatrixFamily::RankDeficientDct,
            extra_rows,
            augmentation,
            ..Self::dct(m, n, coherence, seed)
        }
    }

    /// Rows of the generated matrix.
    pub fn total_rows(&self) -> usize {
        match self.family {
            MatrixFamily::RankDeficientDct => self.m + self.extra_rows,
            _ => self.m,
        }
    }

    /// Minimum support separation used with this matrix family:
    /// `⌈2E⌉` for DCT families, 1 otherwise.
    pub fn default_min_separation(&self) -> usize {
        match self.family {
            MatrixFamily::CorrelatedGaussian => 1,
            _ => (2.0 * self.coherence).ceil().max(1.0) as usize,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum MagnitudeModel {
    /// `sign · 10^{D·u}` with `u ~ U[0,1]`, so the dynamic range is at most `10^D`.
    DynamicRange { d: f64 },
    /// standard normal entries
    UnitGaussian,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignalSpec {
    pub n: usize,
    pub s: usize,
    pub magnitude: MagnitudeModel,
    #[serde(default = "one_usize")]
    pub min_separation: usize,
    #[serde(default)]
    pub seed: u64,
}

fn one_usize() -> usize {
    1
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// entrywise standard deviation of the additive noise
    pub sigma: f64,
    /// `ε = eps_factor · ‖σξ‖₂`
    pub eps_factor: f64,
}

impl NoiseSpec {
    pub fn noiseless() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!("noise sigma must be >= 0, got {}", self.sigma)));
        }
        if self.sigma > 0.0 && !(self.eps_factor >= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "eps_factor must be >= 1 for noisy data, got {}",
                self.eps_factor
            )));
        }
        Ok(())
    }
}

pub fn gen_matrix(spec: &MatrixSpec) -> Result<DenseMatrix> {
    match spec.family {
        MatrixFamily::OversampledDct => gen_dct_matrix(spec),
        MatrixFamily::CorrelatedGaussian => gen_gaussian_matrix(spec),
        MatrixFamily::RankDeficientDct => gen_rank_deficient(spec),
    }
}

fn check_shape(spec: &MatrixSpec) -> Result<()> {
    if spec.m == 0 || spec.n == 0 {
        return Err(Error::InvalidArgument(format!(
            "matrix must be nonempty, got {}x{}",
            spec.m, spec.n
        )));
    }
    Ok(())
}

fn dct_from_rng(m: usize, n: usize, coherence: f64, rng: &mut impl Rng) -> Result<DenseMatrix> {
    if !(coherence > 0.0 && coherence.is_finite()) {
        return Err(Error::InvalidArgument(format!("coherence E must be positive, got {coherence}")));
    }
    let w: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
    let scale = 1.0 / (m as f64).sqrt();
    let tau = 2.0 * std::f64::consts::PI / coherence;
    let mut data = Vec::with_capacity(m * n);
    for &wi in &w {
        // column j is 1-based
        data.extend((1..=n).map(|j| scale * (tau * j as f64 * wi).cos()));
    }
    DenseMatrix::new(m, n, data)
}

/// Oversampled DCT: column `j` (1-based) is `cos(2πj·w/E)/√m` with
/// `w ~ U[0,1]^m` drawn once per matrix.
pub fn gen_dct_matrix(spec: &MatrixSpec) -> Result<DenseMatrix> {
    if spec.family != MatrixFamily::OversampledDct {
        return Err(Error::InvalidArgument("spec is not an oversampled DCT family".into()));
    }
    check_shape(spec)?;
    let mut rng = stream_rng(spec.seed, Stream::Matrix);
    dct_from_rng(spec.m, spec.n, spec.coherence, &mut rng)
}

/// Rows i.i.d. `N(0, Σ)` with unit variances and constant correlation `r`,
/// realized as `√r·g·1 + √(1−r)·z`.
pub fn gen_gaussian_matrix(spec: &MatrixSpec) -> Result<DenseMatrix> {
    if spec.family != MatrixFamily::CorrelatedGaussian {
        return Err(Error::InvalidArgument("spec is not a correlated Gaussian family".into()));
    }
    check_shape(spec)?;
    let r = spec.correlation;
    if !(0.0..1.0).contains(&r) {
        return Err(Error::InvalidArgument(format!("correlation must lie in [0, 1), got {r}")));
    }
    let mut rng = stream_rng(spec.seed, Stream::Matrix);
    let (common, own) = (r.sqrt(), (1.0 - r).sqrt());
    let mut data = Vec::with_capacity(spec.m * spec.n);
    for _ in 0..spec.m {
        let g = normal(&mut rng);
        for _ in 0..spec.n {
            data.push(common * g + own * normal(&mut rng));
        }
    }
    DenseMatrix::new(spec.m, spec.n, data)
}

/// An `m x n` oversampled DCT matrix followed by `extra_rows` rows built from
/// randomly selected base rows, so the rank stays at most `m`.
pub fn gen_rank_deficient(spec: &MatrixSpec) -> Result<DenseMatrix> {
    if spec.family != MatrixFamily::RankDeficientDct {
        return Err(Error::InvalidArgument("spec is not a rank-deficient DCT family".into()));
    }
    check_shape(spec)?;
    let (m, n, extra) = (spec.m, spec.n, spec.extra_rows);
    if extra > m {
        return Err(Error::InvalidArgument(format!(
            "cannot select {extra} distinct rows from {m}"
        )));
    }
    let mut rng = stream_rng(spec.seed, Stream::Matrix);
    let base = dct_from_rng(m, n, spec.coherence, &mut rng)?;
    let picked = index::sample(&mut rng, m, extra).into_vec();

    let mut data = base.as_slice().to_vec();
    data.reserve(extra * n);
    match spec.augmentation {
        Augmentation::Copy => {
            for &i in &picked {
                data.extend_from_slice(base.row(i));
            }
        }
        Augmentation::Combine => {
            for _ in 0..extra {
                let mut row = vec![0.0; n];
                for &i in &picked {
                    let c = normal(&mut rng);
                    crate::linalg::axpy(c, base.row(i), &mut row);
                }
                data.extend(row);
            }
        }
    }
    DenseMatrix::new(m + extra, n, data)
}

/// Largest absolute cosine between two distinct columns.
pub fn mutual_coherence(a: &DenseMatrix) -> f64 {
    let at = a.transpose();
    let cols: Vec<&[f64]> = (0..a.cols()).map(|j| at.row(j)).collect();
    let norms: Vec<f64> = cols.iter().map(|c| norm_l2(c)).collect();
    let mut best: f64 = 0.0;
    for i in 0..cols.len() {
        if norms[i] == 0.0 {
            continue;
        }
        for j in i + 1..cols.len() {
            if norms[j] == 0.0 {
                continue;
            }
            best = best.max(dot(cols[i], cols[j]).abs() / (norms[i] * norms[j]));
        }
    }
    best
}

/// Ratio of the largest to the smallest nonzero magnitude; `None` for a zero vector.
pub fn dynamic_range(x: &[f64]) -> Option<f64> {
    let mags = x.iter().filter(|v| **v != 0.0).map(|v| v.abs());
    let (lo, hi) = mags.fold((f64::INFINITY, 0.0_f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
    (hi > 0.0).then(|| hi / lo)
}

/// Uniformly random support of size `s` in `0..n` with pairwise gaps of at
/// least `sep`, in increasing order.
///
/// Sampling is exact: choosing `s` points from `n − (s−1)(sep−1)` slots and
/// spreading them by `sep − 1` is a bijection onto the valid placements.
pub fn sample_separated_support(n: usize, s: usize, sep: usize, rng: &mut impl Rng) -> Result<Vec<usize>> {
    let sep = sep.max(1);
    if s == 0 {
        return Err(Error::InvalidArgument("sparsity must be at least 1".into()));
    }
    let needed = (s - 1) * sep + 1;
    if needed > n {
        return Err(Error::Infeasible(format!(
            "{s} spikes separated by {sep} need length {needed}, have {n}"
        )));
    }
    let slots = n - (s - 1) * (sep - 1);
    let mut idx = index::sample(rng, slots, s).into_vec();
    idx.sort_unstable();
    Ok(idx.into_iter().enumerate().map(|(k, i)| i + k * (sep - 1)).collect())
}

pub fn gen_signal(spec: &SignalSpec) -> Result<Vec<f64>> {
    let mut rng = stream_rng(spec.seed, Stream::Signal);
    let support = sample_separated_support(spec.n, spec.s, spec.min_separation, &mut rng)?;
    let mut x = vec![0.0; spec.n];
    for &i in &support {
        x[i] = match spec.magnitude {
            MagnitudeModel::DynamicRange { d } => {
                let sign = if normal(&mut rng) < 0.0 { -1.0 } else { 1.0 };
                sign * 10f64.powf(d * rng.random::<f64>())
            }
            MagnitudeModel::UnitGaussian => normal(&mut rng),
        };
    }
    Ok(x)
}

/// `b = Ax + σξ` with `ξ` standard normal, and the budget `ε = eps_factor·‖σξ‖₂`.
pub fn synthesize_measurements(
    a: &DenseMatrix,
    x: &[f64],
    noise: &NoiseSpec,
    seed: u64,
) -> Result<(Vec<f64>, f64)> {
    if x.len() != a.cols() {
        return Err(Error::Dimension(format!(
            "signal has length {}, matrix has {} columns",
            x.len(),
            a.cols()
        )));
    }
    noise.validate()?;
    let mut b = a.matvec(x);
    if noise.sigma == 0.0 {
        return Ok((b, 0.0));
    }
    let mut rng = stream_rng(seed, Stream::Noise);
    let e: Vec<f64> = (0..b.len()).map(|_| noise.sigma * normal(&mut rng)).collect();
    for (bi, ei) in b.iter_mut().zip(&e) {
        *bi += ei;
    }
    Ok((b, noise.eps_factor * norm_l2(&e)))
}
