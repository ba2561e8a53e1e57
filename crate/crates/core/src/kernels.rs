//! Covariance functions `R(s,t)` of the example processes.
//!
//! Every built-in family starts at the origin (`R(0,0) = 0`). Incremental
//! variances `d(s,t) = E(X_t − X_s)²` are evaluated in closed form so that
//! the `|t−s|^{2H}` part never goes through a cancellation of `O(1)` terms.

use alloc::vec::Vec;
use libm::{expm1, fabs, log1p, pow};

use crate::error::{config, data, usage};
use crate::{Error, Result};

/// Covariance model of a centred Gaussian process on `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    BrownianMotion,
    FractionalBm { hurst: f64 },
    SubFractionalBm { hurst: f64 },
    /// Bifractional Brownian motion; `k = 1` is fractional Brownian motion.
    BiFractionalBm { hurst: f64, k: f64 },
    Tabulated(TabulatedGram),
}

/// A Gram matrix given only on a fixed grid of times.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedGram {
    times: Vec<f64>,
    gram: Vec<f64>,
}

impl TabulatedGram {
    /// Validates a symmetric Gram matrix (row-major, `times.len()²` entries).
    pub fn new(times: Vec<f64>, gram: Vec<f64>) -> Result<Self> {
        let n = times.len();
        if n == 0 {
            return Err(usage!("tabulated kernel needs at least one time"));
        }
        if gram.len() != n * n {
            return Err(usage!("gram has {} entries, expected {}", gram.len(), n * n));
        }
        if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(data!("tabulated times must be finite and nonnegative"));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(data!("tabulated times must be strictly increasing"));
        }
        if gram.iter().any(|g| !g.is_finite()) {
            return Err(data!("tabulated gram has non-finite entries"));
        }
        let scale = gram.iter().fold(0.0f64, |m, g| m.max(fabs(*g)));
        for i in 0..n {
            if gram[i * n + i] < 0.0 {
                return Err(data!("negative variance at grid index {i}"));
            }
            for j in 0..i {
                let (a, b) = (gram[i * n + j], gram[j * n + i]);
                if fabs(a - b) > 1e-12 * scale {
                    return Err(data!("gram not symmetric at ({i}, {j}): {a} vs {b}"));
                }
            }
        }
        Ok(Self { times, gram })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn gram(&self) -> &[f64] {
        &self.gram
    }

    fn index_of(&self, t: f64) -> Result<usize> {
        let last = self.times[self.times.len() - 1];
        let tol = 1e-12 * last.max(1.0);
        let pos = self.times.partition_point(|x| *x < t - tol);
        match self.times.get(pos) {
            Some(x) if fabs(*x - t) <= tol => Ok(pos),
            _ => Err(Error::Domain { time: t, lo: self.times[0], hi: last }),
        }
    }

    fn value(&self, s: f64, t: f64) -> Result<f64> {
        let n = self.times.len();
        Ok(self.gram[self.index_of(s)? * n + self.index_of(t)?])
    }
}

/// A named covariance model together with its horizon `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    family: Family,
    horizon: f64,
}

fn check_hurst(h: f64) -> Result<()> {
    if h.is_finite() && h > 0.0 && h < 1.0 {
        Ok(())
    } else {
        Err(config!("Hurst index {h} outside (0, 1)"))
    }
}

fn check_horizon(t: f64) -> Result<()> {
    if t.is_finite() && t > 0.0 {
        Ok(())
    } else {
        Err(config!("horizon {t} must be positive and finite"))
    }
}

impl KernelSpec {
    pub fn brownian(horizon: f64) -> Result<Self> {
        check_horizon(horizon)?;
        Ok(Self { family: Family::BrownianMotion, horizon })
    }

    pub fn fbm(hurst: f64, horizon: f64) -> Result<Self> {
        check_hurst(hurst)?;
        check_horizon(horizon)?;
        Ok(Self { family: Family::FractionalBm { hurst }, horizon })
    }

    pub fn sub_fbm(hurst: f64, horizon: f64) -> Result<Self> {
        check_hurst(hurst)?;
        check_horizon(horizon)?;
        Ok(Self { family: Family::SubFractionalBm { hurst }, horizon })
    }

    /// Requires `H ∈ (0,1)`, `K ∈ (0,2)` and `HK ∈ (0,1)`.
    pub fn bifbm(hurst: f64, k: f64, horizon: f64) -> Result<Self> {
        check_hurst(hurst)?;
        check_horizon(horizon)?;
        if !(k.is_finite() && k > 0.0 && k < 2.0) {
            return Err(config!("bifractional K = {k} outside (0, 2)"));
        }
        if hurst * k >= 1.0 {
            return Err(config!("bifractional H·K = {} must lie in (0, 1)", hurst * k));
        }
        Ok(Self { family: Family::BiFractionalBm { hurst, k }, horizon })
    }

    /// Horizon is the last tabulated time.
    pub fn tabulated(table: TabulatedGram) -> Result<Self> {
        let horizon = table.times[table.times.len() - 1];
        check_horizon(horizon)?;
        Ok(Self { family: Family::Tabulated(table), horizon })
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Self-similarity exponent of the built-in families (`HK` for bifBm).
    pub fn scaling_exponent(&self) -> Option<f64> {
        match self.family {
            Family::BrownianMotion => Some(0.5),
            Family::FractionalBm { hurst } | Family::SubFractionalBm { hurst } => Some(hurst),
            Family::BiFractionalBm { hurst, k } => Some(hurst * k),
            Family::Tabulated(_) => None,
        }
    }

    fn check_time(&self, t: f64) -> Result<f64> {
        let slack = 1e-12 * self.horizon;
        if t.is_finite() && t >= -slack && t <= self.horizon + slack {
            Ok(t.clamp(0.0, self.horizon))
        } else {
            Err(Error::Domain { time: t, lo: 0.0, hi: self.horizon })
        }
    }

    /// `R(s, t) = E[X_s X_t]`.
    pub fn covariance(&self, s: f64, t: f64) -> Result<f64> {
        if let Family::Tabulated(table) = &self.family {
            return table.value(s, t);
        }
        let (s, t) = (self.check_time(s)?, self.check_time(t)?);
        Ok(self.covariance_unchecked(s, t))
    }

    fn covariance_unchecked(&self, s: f64, t: f64) -> f64 {
        let diff = fabs(t - s);
        match &self.family {
            Family::BrownianMotion => s.min(t),
            Family::FractionalBm { hurst } => {
                let e = 2.0 * hurst;
                0.5 * (pow(t, e) + pow(s, e) - pow(diff, e))
            }
            Family::SubFractionalBm { hurst } => {
                let e = 2.0 * hurst;
                pow(s, e) + pow(t, e) - 0.5 * (pow(s + t, e) + pow(diff, e))
            }
            Family::BiFractionalBm { hurst, k } => {
                let e = 2.0 * hurst;
                pow(2.0, -k) * (pow(pow(t, e) + pow(s, e), *k) - pow(diff, e * k))
            }
            Family::Tabulated(_) => unreachable!("tabulated kernels are looked up"),
        }
    }

    /// `d(s, t) = E(X_t − X_s)²`.
    pub fn incremental_variance(&self, s: f64, t: f64) -> Result<f64> {
        if let Family::Tabulated(table) = &self.family {
            return Ok(table.value(t, t)? + table.value(s, s)? - 2.0 * table.value(s, t)?);
        }
        let (s, t) = (self.check_time(s)?, self.check_time(t)?);
        Ok(self.incremental_variance_unchecked(s, t))
    }

    fn incremental_variance_unchecked(&self, s: f64, t: f64) -> f64 {
        let diff = fabs(t - s);
        if diff == 0.0 {
            return 0.0;
        }
        let d = match &self.family {
            Family::BrownianMotion => diff,
            Family::FractionalBm { hurst } => pow(diff, 2.0 * hurst),
            Family::SubFractionalBm { hurst } => {
                let e = 2.0 * hurst;
                pow(diff, e) + pow(s + t, e) - pow(2.0, e - 1.0) * (pow(s, e) + pow(t, e))
            }
            Family::BiFractionalBm { hurst, k } => {
                let (e, c) = (2.0 * hurst, pow(2.0, 1.0 - k));
                // t^{2HK} + s^{2HK} − 2^{1−K}(t^{2H} + s^{2H})^K written as
                // (σ/2)^K [(1+x)^K + (1−x)^K − 2] with σ = a + b, x = (a−b)/σ,
                // which vanishes identically at K = 1 instead of cancelling.
                let (a, b) = (pow(t, e), pow(s, e));
                let sum = a + b;
                let rest = if sum > 0.0 {
                    let x = (a - b) / sum;
                    pow(0.5 * sum, *k) * (expm1(k * log1p(x)) + expm1(k * log1p(-x)))
                } else {
                    0.0
                };
                c * pow(diff, e * k) + rest
            }
            Family::Tabulated(_) => unreachable!("tabulated kernels are looked up"),
        };
        d.max(0.0)
    }

    /// `E[(Σ a_i X_{t_i})(Σ b_j X_{u_j})] = Σ_i Σ_j a_i b_j R(t_i, u_j)`.
    pub fn weighted_difference_cov(
        &self,
        times_a: &[f64],
        weights_a: &[f64],
        times_b: &[f64],
        weights_b: &[f64],
    ) -> Result<f64> {
        check_lengths(times_a, weights_a)?;
        check_lengths(times_b, weights_b)?;
        let mut acc = 0.0;
        for (t, a) in times_a.iter().zip(weights_a) {
            for (u, b) in times_b.iter().zip(weights_b) {
                acc += a * b * self.covariance(*t, *u)?;
            }
        }
        Ok(acc)
    }

    /// Same quantity for zero-sum weight vectors, via `−½ ΣΣ a_i b_j d(t_i, u_j)`.
    ///
    /// The variance terms `R(t,t)` drop out because both weight vectors sum
    /// to zero, so only incremental variances are evaluated. Brownian motion
    /// keeps the `min(s, t)` form, which makes disjoint increments exactly
    /// uncorrelated.
    pub fn zero_sum_cov(
        &self,
        times_a: &[f64],
        weights_a: &[f64],
        times_b: &[f64],
        weights_b: &[f64],
    ) -> Result<f64> {
        if matches!(self.family, Family::BrownianMotion) {
            return self.weighted_difference_cov(times_a, weights_a, times_b, weights_b);
        }
        check_lengths(times_a, weights_a)?;
        check_lengths(times_b, weights_b)?;
        let mut acc = 0.0;
        for (t, a) in times_a.iter().zip(weights_a) {
            for (u, b) in times_b.iter().zip(weights_b) {
                acc += a * b * self.incremental_variance(*t, *u)?;
            }
        }
        Ok(-0.5 * acc)
    }

    /// Gram matrix `[R(t_i, t_j)]`, row-major.
    pub fn gram(&self, times: &[f64]) -> Result<Vec<f64>> {
        self.fill_symmetric(times, |k, s, t| k.covariance(s, t))
    }

    /// Matrix of incremental variances `[d(t_i, t_j)]`, row-major.
    pub fn increment_gram(&self, times: &[f64]) -> Result<Vec<f64>> {
        self.fill_symmetric(times, |k, s, t| k.incremental_variance(s, t))
    }

    fn fill_symmetric(
        &self,
        times: &[f64],
        f: impl Fn(&Self, f64, f64) -> Result<f64>,
    ) -> Result<Vec<f64>> {
        let n = times.len();
        let mut out = alloc::vec![0.0; n * n];
        // Validate once, then evaluate the closed forms directly.
        let checked: Vec<f64> = match self.family {
            Family::Tabulated(_) => times.to_vec(),
            _ => times.iter().map(|t| self.check_time(*t)).collect::<Result<_>>()?,
        };
        for i in 0..n {
            for j in 0..=i {
                let v = f(self, checked[i], checked[j])?;
                out[i * n + j] = v;
                out[j * n + i] = v;
            }
        }
        Ok(out)
    }
}

fn check_lengths(times: &[f64], weights: &[f64]) -> Result<()> {
    if times.len() == weights.len() {
        Ok(())
    } else {
        Err(usage!("{} times but {} weights", times.len(), weights.len()))
    }
}
