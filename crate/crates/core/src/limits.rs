//! Convergence conditions evaluated on `Γ`: energy, 2-planar variation,
//! the almost-sure condition `‖Γ‖₂ = o(1/log n)`, the fourth-moment CLT
//! ratio, the Lindeberg ratio and Berry-Esseen quantities.
//!
//! Asymptotic statements cannot be decided from finitely many levels. The
//! verdicts here are trend fits over the supplied schedule and are always
//! reported together with the raw sequence.

use alloc::vec::Vec;
use libm::{log, sqrt};

use crate::error::usage;
use crate::kernels::KernelSpec;
use crate::partitions::Partition;
use crate::regression::loglog_slope;
use crate::schemes::{build_cross_gamma, DifferenceScheme};
use crate::spectral::{self, MomentReport, NormReport, TraceMoments};
use crate::{CovMatrix, Error, Result};

/// `trace Γ = Σ E Y_k²`.
pub fn energy_trace(g: &CovMatrix) -> f64 {
    g.trace()
}

/// `Σ_k Σ_j (E[Y_k^{(n)} Y_j^{(m)}])²`.
pub fn planar_variation(
    scheme: &DifferenceScheme,
    kernel: &KernelSpec,
    p_n: &Partition,
    p_m: &Partition,
) -> Result<f64> {
    Ok(build_cross_gamma(scheme, p_n, p_m, kernel)?.sum_of_squares())
}

/// Monotonicity and tail log-log slope of a positive sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Trend {
    /// Strictly decreasing over the whole schedule.
    pub decreasing: bool,
    /// Least-squares slope of `log value` on `log n` over the last half
    /// of the schedule (at least two points).
    pub tail_slope: f64,
}

impl Trend {
    pub fn vanishing(&self) -> bool {
        self.decreasing && self.tail_slope < 0.0
    }
}

pub fn classify_trend(ns: &[usize], values: &[f64]) -> Result<Trend> {
    if ns.len() != values.len() {
        return Err(usage!("{} levels but {} values", ns.len(), values.len()));
    }
    if ns.len() < 2 {
        return Err(usage!("a trend needs at least two levels"));
    }
    if ns.windows(2).any(|w| w[1] <= w[0]) {
        return Err(usage!("levels must be strictly increasing"));
    }
    let decreasing = values.windows(2).all(|w| w[1] < w[0]);
    let tail = ns.len().div_ceil(2);
    let start = ns.len() - tail.max(2);
    let tail_slope = if values[start..].iter().all(|v| *v > 0.0) {
        let x: Vec<f64> = ns[start..].iter().map(|n| *n as f64).collect();
        loglog_slope(&x, &values[start..])?.slope
    } else {
        f64::NAN
    };
    Ok(Trend { decreasing, tail_slope })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum AsVerdict {
    /// `‖Γ‖₂ log n` decreases with a negative tail slope.
    AsSufficient,
    /// `‖Γ‖₂` vanishes but `‖Γ‖₂ log n` does not decrease.
    ProbOnly,
    NoConclusion,
}

impl AsVerdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            AsVerdict::AsSufficient => "as_sufficient",
            AsVerdict::ProbOnly => "prob_only",
            AsVerdict::NoConclusion => "no_conclusion",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AsLevel {
    pub n: usize,
    pub spectral: f64,
    pub spectral_logn: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AsClassification {
    pub levels: Vec<AsLevel>,
    pub spectral_trend: Trend,
    pub spectral_logn_trend: Trend,
    pub verdict: AsVerdict,
}

/// Classify from precomputed spectral norms `(n, ‖Γ⁽ⁿ⁾‖₂)`; every `n ≥ 2`.
pub fn as_classify_norms(schedule: &[(usize, f64)]) -> Result<AsClassification> {
    if schedule.iter().any(|(n, _)| *n < 2) {
        return Err(usage!("levels must satisfy n ≥ 2 so that log n > 0"));
    }
    let levels: Vec<AsLevel> = schedule
        .iter()
        .map(|&(n, spectral)| AsLevel { n, spectral, spectral_logn: spectral * log(n as f64) })
        .collect();
    let ns: Vec<usize> = levels.iter().map(|l| l.n).collect();
    let s: Vec<f64> = levels.iter().map(|l| l.spectral).collect();
    let sl: Vec<f64> = levels.iter().map(|l| l.spectral_logn).collect();
    let spectral_trend = classify_trend(&ns, &s)?;
    let spectral_logn_trend = classify_trend(&ns, &sl)?;
    let verdict = if spectral_logn_trend.vanishing() {
        AsVerdict::AsSufficient
    } else if spectral_trend.vanishing() {
        AsVerdict::ProbOnly
    } else {
        AsVerdict::NoConclusion
    };
    Ok(AsClassification { levels, spectral_trend, spectral_logn_trend, verdict })
}

/// Classify a schedule of covariance matrices by their spectral norms.
pub fn as_classify(schedule: &[(usize, &CovMatrix)]) -> Result<AsClassification> {
    let norms = schedule
        .iter()
        .map(|(n, g)| Ok((*n, spectral::norms(g)?.spectral)))
        .collect::<Result<Vec<_>>>()?;
    as_classify_norms(&norms)
}

fn nondegenerate(var_vn: f64) -> Result<()> {
    if var_vn > 0.0 {
        Ok(())
    } else {
        Err(Error::DegenerateKernel(alloc::format!("Var(V_n) = {var_vn}")))
    }
}

/// `Σλ⁴ / (Σλ²)²` from traces alone.
pub fn clt_ratio(t: &TraceMoments) -> Result<f64> {
    nondegenerate(t.var_vn)?;
    Ok(t.trace_quad / (t.trace_sq * t.trace_sq))
}

/// `(Σλ⁴ / (Σλ²)², λ* / √Var V)`.
pub fn clt_ratios(m: &MomentReport) -> Result<(f64, f64)> {
    let ratio = clt_ratio(&m.traces())?;
    Ok((ratio, m.lambda_star / sqrt(m.var_vn)))
}

/// Constant-free Berry-Esseen quantities.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BerryEsseen {
    /// `√(E F⁴ − 3)` for the normalized `F = (V − EV)/√Var V`.
    pub quantity: f64,
    /// `√n · λ*`.
    pub lambda_bound: f64,
}

impl BerryEsseen {
    /// Both bounds multiplied by a user-chosen constant.
    pub fn scaled(self, c: f64) -> Self {
        Self { quantity: c * self.quantity, lambda_bound: c * self.lambda_bound }
    }
}

/// `√max(0, excess kurtosis)`.
pub fn be_quantity(t: &TraceMoments) -> Result<f64> {
    nondegenerate(t.var_vn)?;
    Ok(sqrt(t.kurtosis_excess.max(0.0)))
}

pub fn berry_esseen(m: &MomentReport, n: usize) -> Result<BerryEsseen> {
    let quantity = be_quantity(&m.traces())?;
    Ok(BerryEsseen { quantity, lambda_bound: sqrt(n as f64) * m.lambda_star })
}

/// Every condition for one level `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConditionReport {
    pub n: usize,
    pub energy: f64,
    pub planar_nn: f64,
    pub spectral_logn: f64,
    pub one_norm_h: f64,
    pub clt_ratio: f64,
    pub lindeberg_ratio: f64,
    pub be_quantity: f64,
    pub be_lambda_bound: f64,
}

impl ConditionReport {
    /// CSV column order.
    pub const FIELDS: [&'static str; 9] = [
        "n",
        "energy",
        "planar_nn",
        "spectral_logn",
        "one_norm_h",
        "clt_ratio",
        "lindeberg_ratio",
        "be_quantity",
        "be_lambda_bound",
    ];
}

/// Conditions at level `n` (the refinement index used for `log n`).
pub fn condition_report(n: usize, g: &CovMatrix) -> Result<ConditionReport> {
    let (norms, moments) = spectral::norms_and_moments(g)?;
    conditions_from(n, &norms, &moments)
}

/// [`condition_report`] from an already computed spectrum.
pub fn conditions_from(n: usize, norms: &NormReport, moments: &MomentReport) -> Result<ConditionReport> {
    let (clt_ratio, lindeberg_ratio) = clt_ratios(moments)?;
    let be = berry_esseen(moments, moments.n)?;
    Ok(ConditionReport {
        n,
        energy: norms.trace,
        planar_nn: moments.trace_sq,
        spectral_logn: norms.spectral * log(n as f64),
        one_norm_h: norms.one_norm,
        clt_ratio,
        lindeberg_ratio,
        be_quantity: be.quantity,
        be_lambda_bound: be.lambda_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partitions::make_uniform;
    use crate::schemes::{build_gamma, Phi};
    use crate::spectral::qv_moments;
    use alloc::vec;

    fn bm_gamma(n: usize) -> CovMatrix {
        let bm = KernelSpec::brownian(1.0).unwrap();
        build_gamma(&DifferenceScheme::FirstOrder(Phi::One), &make_uniform(n, 1.0).unwrap(), &bm).unwrap()
    }

    fn fbm_gamma(h: f64, n: usize) -> CovMatrix {
        let k = KernelSpec::fbm(h, 1.0).unwrap();
        let scheme = DifferenceScheme::first_order_power(2.0 * h - 1.0).unwrap();
        build_gamma(&scheme, &make_uniform(n, 1.0).unwrap(), &k).unwrap()
    }

    #[test]
    fn brownian_energy_and_planar_variation() {
        let bm = KernelSpec::brownian(1.0).unwrap();
        let one = DifferenceScheme::FirstOrder(Phi::One);
        let mut previous = f64::INFINITY;
        for n in [1usize, 2, 4, 16, 64] {
            let g = bm_gamma(n);
            assert!((energy_trace(&g) - 1.0).abs() < 1e-14);
            let p = make_uniform(n, 1.0).unwrap();
            let pv = planar_variation(&one, &bm, &p, &p).unwrap();
            assert!((pv - 1.0 / n as f64).abs() < 1e-15);
            assert!((pv - g.sum_of_squares()).abs() <= 1e-12 * pv);
            assert!(pv < previous);
            previous = pv;
        }
        let pv = planar_variation(&one, &bm, &make_uniform(1, 1.0).unwrap(), &make_uniform(2, 1.0).unwrap()).unwrap();
        assert!((pv - 0.5).abs() < 1e-15);
    }

    #[test]
    fn clt_ratio_identity_and_rank_one() {
        for n in [1usize, 3, 10] {
            let m = qv_moments(&CovMatrix::identity(n)).unwrap();
            let (c, l) = clt_ratios(&m).unwrap();
            assert!((c - 1.0 / n as f64).abs() < 1e-14);
            assert!((l - 1.0 / (2.0 * n as f64).sqrt()).abs() < 1e-14);
            let be = berry_esseen(&m, n).unwrap();
            assert!((be.quantity - (12.0 / n as f64).sqrt()).abs() < 1e-13);
        }
        let v = [1.0, -2.0, 0.5, 3.0];
        let mut a = vec![0.0; 16];
        for i in 0..4 {
            for j in 0..4 {
                a[i * 4 + j] = v[i] * v[j];
            }
        }
        let m = qv_moments(&CovMatrix::new(4, a).unwrap()).unwrap();
        let (c, l) = clt_ratios(&m).unwrap();
        assert!((c - 1.0).abs() < 1e-12);
        assert!((l - 0.5f64.sqrt()).abs() < 1e-12);
        assert!((berry_esseen(&m, 4).unwrap().quantity - 12f64.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn degenerate_variance_is_an_error() {
        let m = qv_moments(&CovMatrix::diagonal(&[0.0, 0.0])).unwrap();
        assert!(matches!(clt_ratios(&m), Err(Error::DegenerateKernel(_))));
        assert!(matches!(berry_esseen(&m, 2), Err(Error::DegenerateKernel(_))));
    }

    #[test]
    fn clt_ratio_orders_hurst_indices() {
        let mild = clt_ratio(&spectral::trace_moments(&fbm_gamma(0.6, 512)).unwrap()).unwrap();
        let strong = clt_ratio(&spectral::trace_moments(&fbm_gamma(0.9, 512)).unwrap()).unwrap();
        assert!(mild < strong, "{mild} vs {strong}");
    }

    #[test]
    fn as_verdicts() {
        let schedule: Vec<(usize, CovMatrix)> = (2..=12).map(|j| (1usize << j, bm_gamma(1 << j))).collect();
        let refs: Vec<(usize, &CovMatrix)> = schedule.iter().map(|(n, g)| (*n, g)).collect();
        let c = as_classify(&refs).unwrap();
        assert_eq!(c.verdict, AsVerdict::AsSufficient);
        for l in &c.levels {
            assert!((l.spectral - 1.0 / l.n as f64).abs() < 1e-15);
        }

        let fixed = CovMatrix::identity(3);
        let c = as_classify(&[(4, &fixed), (8, &fixed), (16, &fixed)]).unwrap();
        assert_eq!(c.verdict, AsVerdict::NoConclusion);

        // ‖Γ‖₂ = 1/log(n)^{1/2}: vanishes, but ‖Γ‖₂ log n grows.
        let slow: Vec<(usize, f64)> = (4..10).map(|j| (1usize << j, 1.0 / log((1 << j) as f64).sqrt())).collect();
        assert_eq!(as_classify_norms(&slow).unwrap().verdict, AsVerdict::ProbOnly);

        assert!(as_classify_norms(&[(4, 1.0)]).is_err());
        assert!(as_classify_norms(&[(8, 1.0), (4, 0.5)]).is_err());
    }

    #[test]
    fn fbm_high_hurst_sweep_is_reported() {
        let levels: Vec<(usize, f64)> = (6..=10)
            .map(|j| (1usize << j, spectral::norms(&fbm_gamma(0.9, 1 << j)).unwrap().spectral))
            .collect();
        let c = as_classify_norms(&levels).unwrap();
        assert_eq!(c.levels.len(), 5);
        // λ* ~ n^{2H−2} = n^{-0.2}; against log n the decay is too slow to be
        // seen at these sizes.
        assert!(c.spectral_trend.vanishing());
        assert!(c.spectral_trend.tail_slope > -0.3 && c.spectral_trend.tail_slope < -0.1);
    }

    #[test]
    fn condition_report_invariants() {
        for (h, n) in [(0.3, 64), (0.6, 100), (0.9, 128)] {
            let g = fbm_gamma(h, n);
            let r = condition_report(n, &g).unwrap();
            assert!(r.clt_ratio > 0.0 && r.clt_ratio <= 1.0);
            assert!(r.lindeberg_ratio * r.lindeberg_ratio <= 0.5 + 1e-15);
            assert!((r.energy - 1.0).abs() < 1e-12);
            let direct = spectral::trace_fourth_power(&g);
            let m = qv_moments(&g).unwrap();
            assert!((r.clt_ratio * m.trace_sq * m.trace_sq - direct).abs() <= 1e-9 * direct);
        }
    }
}
