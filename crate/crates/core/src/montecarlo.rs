//! Sampling `Y ~ N(0, Γ)` and empirical statistics of `V = Σ Y_k²`.
//!
//! Replicate `r` of a run with seed `s` draws its normals from ChaCha8
//! seeded with `s`, stream `r`. Every replicate is therefore reproducible on
//! its own, and results do not depend on the order in which replicates are
//! evaluated.

use alloc::vec;
use alloc::vec::Vec;
use libm::{fabs, sqrt};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::usage;
use crate::estimators::PathSample;
use crate::kernels::KernelSpec;
use crate::linalg::{cholesky, dot, SymmetricEigen};
use crate::partitions::Partition;
use crate::schemes::{build_gamma, DifferenceScheme, Phi};
use crate::{normal_cdf, CovMatrix, Error, Result};

pub const DEFAULT_JITTER: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct McConfig {
    pub replicates: usize,
    pub seed: u64,
    /// Eigenvalues down to `−jitter · λ_max` are clipped to zero.
    pub jitter: f64,
}

impl McConfig {
    pub fn new(replicates: usize, seed: u64) -> Result<Self> {
        if replicates == 0 {
            return Err(usage!("at least one replicate is required"));
        }
        Ok(Self { replicates, seed, jitter: DEFAULT_JITTER })
    }
}

#[derive(Debug, Clone)]
enum FactorKind {
    /// Lower triangular, row-major.
    Lower(Vec<f64>),
    /// Dense `Qᵀ √Λ`, row-major.
    Dense(Vec<f64>),
}

/// `F` with `F Fᵀ = Γ`.
#[derive(Debug, Clone)]
pub struct Factor {
    n: usize,
    kind: FactorKind,
}

impl Factor {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn is_triangular(&self) -> bool {
        matches!(self.kind, FactorKind::Lower(_))
    }

    /// `out = F ξ`.
    pub fn apply(&self, xi: &[f64], out: &mut [f64]) {
        let n = self.n;
        match &self.kind {
            FactorKind::Lower(l) => {
                for (i, o) in out.iter_mut().enumerate().take(n) {
                    *o = dot(&l[i * n..i * n + i + 1], &xi[..=i]);
                }
            }
            FactorKind::Dense(f) => {
                for (i, o) in out.iter_mut().enumerate().take(n) {
                    *o = dot(&f[i * n..(i + 1) * n], xi);
                }
            }
        }
    }

    /// `F Fᵀ`, row-major.
    pub fn reconstruct(&self) -> Vec<f64> {
        let n = self.n;
        let f = match &self.kind {
            FactorKind::Lower(l) | FactorKind::Dense(l) => l,
        };
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let v = dot(&f[i * n..(i + 1) * n], &f[j * n..(j + 1) * n]);
                out[i * n + j] = v;
                out[j * n + i] = v;
            }
        }
        out
    }
}

/// Cholesky when every pivot is positive, otherwise an eigendecomposition
/// with small negative eigenvalues clipped to zero.
pub fn factorize(g: &CovMatrix, jitter: f64) -> Result<Factor> {
    let n = g.dim();
    if !(jitter >= 0.0) {
        return Err(usage!("jitter {jitter} must be nonnegative"));
    }
    if let Some(l) = cholesky(g.as_slice(), n) {
        return Ok(Factor { n, kind: FactorKind::Lower(l) });
    }
    let eig = SymmetricEigen::new(g.as_slice(), n)?;
    let lambda_max = eig.values.iter().fold(0.0f64, |m, v| m.max(*v));
    let threshold = -jitter * lambda_max;
    if let Some(bad) = eig.values.iter().find(|v| **v < threshold) {
        return Err(Error::NotPsd { eigenvalue: *bad, threshold });
    }
    let mut f = vec![0.0; n * n];
    for (k, lambda) in eig.values.iter().enumerate() {
        let s = sqrt(lambda.max(0.0));
        if s == 0.0 {
            continue;
        }
        let q = &eig.vectors[k * n..(k + 1) * n];
        for i in 0..n {
            f[i * n + k] = q[i] * s;
        }
    }
    Ok(Factor { n, kind: FactorKind::Dense(f) })
}

/// Generator for replicate `r` of a run seeded with `seed`.
pub fn replicate_rng(seed: u64, r: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(r);
    rng
}

/// One draw of `Y = F ξ`.
pub fn sample_vector(factor: &Factor, seed: u64, r: u64) -> Vec<f64> {
    let mut rng = replicate_rng(seed, r);
    let xi: Vec<f64> = (0..factor.n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut y = vec![0.0; factor.n];
    factor.apply(&xi, &mut y);
    y
}

/// `V = Σ Y_k²` for replicate `r`.
pub fn sample_replicate(factor: &Factor, seed: u64, r: u64) -> f64 {
    sample_vector(factor, seed, r).iter().map(|y| y * y).sum()
}

/// `cfg.replicates` values of `V`, in replicate order.
pub fn sample_v_replicates(g: &CovMatrix, cfg: &McConfig) -> Result<Vec<f64>> {
    if cfg.replicates == 0 {
        return Err(usage!("at least one replicate is required"));
    }
    let factor = factorize(g, cfg.jitter)?;
    Ok((0..cfg.replicates as u64).map(|r| sample_replicate(&factor, cfg.seed, r)).collect())
}

/// Draws whole paths of a process along a fixed partition.
///
/// The increments are sampled from their covariance and summed from
/// `X_0 = 0`.
#[derive(Debug, Clone)]
pub struct PathSampler {
    times: Vec<f64>,
    factor: Factor,
}

impl PathSampler {
    pub fn new(kernel: &KernelSpec, p: &Partition, jitter: f64) -> Result<Self> {
        let g = build_gamma(&DifferenceScheme::FirstOrder(Phi::One), p, kernel)?;
        Ok(Self { times: p.points().to_vec(), factor: factorize(&g, jitter)? })
    }

    pub fn sample(&self, seed: u64, r: u64) -> PathSample {
        let increments = sample_vector(&self.factor, seed, r);
        let mut values = Vec::with_capacity(self.times.len());
        let mut x = 0.0;
        values.push(x);
        for dx in increments {
            x += dx;
            values.push(x);
        }
        PathSample::from_parts(self.times.clone(), values)
    }
}

pub fn sample_path(kernel: &KernelSpec, p: &Partition, seed: u64) -> Result<PathSample> {
    Ok(PathSampler::new(kernel, p, DEFAULT_JITTER)?.sample(seed, 0))
}

/// Statistics of the standardized sample `(v − center) / scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct McResult {
    pub replicates: usize,
    pub empirical_mean: f64,
    /// Unbiased sample variance.
    pub empirical_var: f64,
    pub empirical_fourth_central: f64,
    pub ks_distance: f64,
    pub se_mean: f64,
    pub se_var: f64,
    /// From up to 20 equal batches; absent with fewer than 4 values.
    pub se_fourth: Option<f64>,
}

const FOURTH_BATCHES: usize = 20;

fn central_moments(z: &[f64]) -> (f64, f64, f64) {
    let n = z.len() as f64;
    let mean = z.iter().sum::<f64>() / n;
    let (mut m2, mut m4) = (0.0, 0.0);
    for x in z {
        let d = (x - mean) * (x - mean);
        m2 += d;
        m4 += d * d;
    }
    (mean, m2 / n, m4 / n)
}

pub fn empirical_stats(vs: &[f64], center: f64, scale: f64) -> Result<McResult> {
    if vs.len() < 2 {
        return Err(usage!("empirical statistics need at least two values, got {}", vs.len()));
    }
    if !(scale > 0.0 && scale.is_finite()) || !center.is_finite() {
        return Err(usage!("scale {scale} must be positive and center finite"));
    }
    let z: Vec<f64> = vs.iter().map(|v| (v - center) / scale).collect();
    let n = z.len();
    let nf = n as f64;
    let (mean, m2, m4) = central_moments(&z);
    let var = m2 * nf / (nf - 1.0);
    let se_fourth = (n >= 4).then(|| {
        let batches = FOURTH_BATCHES.min(n / 2);
        let size = n / batches;
        let fourth: Vec<f64> = (0..batches).map(|b| central_moments(&z[b * size..(b + 1) * size]).2).collect();
        let (_, spread, _) = central_moments(&fourth);
        sqrt(spread * batches as f64 / (batches as f64 - 1.0) / batches as f64)
    });
    Ok(McResult {
        replicates: n,
        empirical_mean: mean,
        empirical_var: var,
        empirical_fourth_central: m4,
        ks_distance: ks_distance_normal(&z)?,
        se_mean: sqrt(var / nf),
        se_var: sqrt((m4 - m2 * m2).max(0.0) / nf),
        se_fourth,
    })
}

/// `sup_x |F_N(x) − Φ(x)|` for the empirical CDF of `z`.
pub fn ks_distance_normal(z: &[f64]) -> Result<f64> {
    if z.is_empty() {
        return Err(usage!("KS distance of an empty sample"));
    }
    if z.iter().any(|x| x.is_nan()) {
        return Err(usage!("sample contains NaN"));
    }
    let mut sorted = z.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, x) in sorted.iter().enumerate() {
        let f = normal_cdf(*x);
        d = d.max(fabs((i + 1) as f64 / n - f)).max(fabs(f - i as f64 / n));
    }
    Ok(d.min(1.0))
}
