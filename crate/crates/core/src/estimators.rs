//! Realized variations of an observed path and a dyadic log-log Hurst
//! estimator.

use alloc::string::String;
use alloc::vec::Vec;
use libm::{exp, fabs, pow, sqrt};

use crate::error::{data, usage};
use crate::kernels::KernelSpec;
use crate::partitions::{make_uniform, Partition};
use crate::regression::loglog_slope;
use crate::schemes::{raw_stencils, weight_rows, DifferenceScheme};
use crate::{quadrature, Result};

/// One observed path: values at strictly increasing times.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct PathSample {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl PathSample {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(usage!("{} times but {} values", times.len(), values.len()));
        }
        if times.is_empty() {
            return Err(data!("empty path"));
        }
        if times.iter().chain(&values).any(|x| !x.is_finite()) {
            return Err(data!("path contains non-finite entries"));
        }
        if let Some(k) = times.windows(2).position(|w| w[1] <= w[0]) {
            return Err(data!("path times not strictly increasing at index {}", k + 1));
        }
        Ok(Self { times, values })
    }

    pub(crate) fn from_parts(times: Vec<f64>, values: Vec<f64>) -> Self {
        Self { times, values }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { times: self.times.clone(), values: self.values.iter().map(|v| v * c).collect() }
    }

    /// Value at `t`, which must be one of the sample times up to `tol`.
    fn value_at(&self, t: f64, tol: f64) -> Result<f64> {
        let i = self.times.partition_point(|s| *s < t - tol);
        match self.times.get(i) {
            Some(s) if fabs(s - t) <= tol => Ok(self.values[i]),
            _ => Err(data!("path has no observation at t = {t}")),
        }
    }

    fn tolerance(&self) -> f64 {
        1e-10 * fabs(self.horizon()).max(f64::MIN_POSITIVE)
    }
}

/// `Σ_k |Y_k|^α` with `Y` built from the observed values by the scheme's
/// normalized weight rows. `kernel` is needed by schemes normalized with
/// an exact variance.
pub fn realized_stat(
    path: &PathSample,
    scheme: &DifferenceScheme,
    p: &Partition,
    alpha: f64,
    kernel: Option<&KernelSpec>,
) -> Result<f64> {
    if !(alpha >= 1.0 && alpha.is_finite()) {
        return Err(usage!("α = {alpha} must be a finite number ≥ 1"));
    }
    let tol = path.tolerance();
    let mut total = 0.0;
    for row in weight_rows(scheme, p, kernel)? {
        let mut y = 0.0;
        for (t, w) in row.times.iter().zip(&row.weights) {
            y += w * path.value_at(*t, tol)?;
        }
        total += if alpha == 2.0 { y * y } else { pow(fabs(y), alpha) };
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EstimateReport {
    pub levels: Vec<usize>,
    /// Unnormalized sums of squared raw differences, one per level.
    pub statistics: Vec<f64>,
    /// Slope of `log statistic` against `log n`.
    pub slope: f64,
    pub hurst: f64,
    /// How `hurst` was obtained from `slope`.
    pub mapping: String,
    /// RMS residual of the log-log fit.
    pub residual: f64,
}

/// Powers of the step carried by the raw stencil.
fn stencil_order(scheme: &DifferenceScheme) -> i32 {
    match scheme {
        DifferenceScheme::SecondOrderBegyn => 1,
        _ => 0,
    }
}

/// Regression step of [`hurst_estimate`], exposed for precomputed sums.
pub fn hurst_from_statistics(levels: &[usize], statistics: &[f64], scheme: &DifferenceScheme) -> Result<EstimateReport> {
    if levels.len() < 2 {
        return Err(usage!("Hurst estimation needs at least two levels"));
    }
    if levels.len() != statistics.len() {
        return Err(usage!("{} levels but {} statistics", levels.len(), statistics.len()));
    }
    if levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(usage!("levels must be strictly increasing"));
    }
    if let Some(k) = statistics.iter().position(|s| !(*s > 0.0 && s.is_finite())) {
        return Err(data!("statistic at level n = {} is {}, not positive", levels[k], statistics[k]));
    }
    let x: Vec<f64> = levels.iter().map(|n| *n as f64).collect();
    let fit = loglog_slope(&x, statistics)?;
    let q = stencil_order(scheme);
    let mapping = if q == 0 {
        String::from("H = (1 - slope) / 2")
    } else {
        alloc::format!("H = (1 - {} - slope) / 2", 2 * q)
    };
    Ok(EstimateReport {
        levels: levels.to_vec(),
        statistics: statistics.to_vec(),
        slope: fit.slope,
        hurst: (1.0 - 2.0 * q as f64 - fit.slope) / 2.0,
        mapping,
        residual: fit.residual,
    })
}

/// Dyadic log-log regression on `Σ (raw difference)²` over uniform
/// partitions of the path's horizon with `n` steps per level.
///
/// The scheme only selects the stencil: normalizations (`φ`, variances) are
/// ignored so that no model assumption enters the statistic.
pub fn hurst_estimate(path: &PathSample, levels: &[usize], scheme: &DifferenceScheme) -> Result<EstimateReport> {
    if levels.len() < 2 {
        return Err(usage!("Hurst estimation needs at least two levels"));
    }
    if path.times()[0] != 0.0 {
        return Err(data!("path must start at t = 0, got {}", path.times()[0]));
    }
    let stencil_scheme = match scheme {
        DifferenceScheme::GeneralA { weights, .. } => DifferenceScheme::GeneralA { weights: weights.clone(), step: None },
        other => other.clone(),
    };
    let tol = path.tolerance();
    let mut statistics = Vec::with_capacity(levels.len());
    for &n in levels {
        if n + 1 > path.len() {
            return Err(data!("level n = {n} needs {} observations, the path has {}", n + 1, path.len()));
        }
        let p = make_uniform(n, path.horizon())?;
        let values = p
            .points()
            .iter()
            .map(|t| path.value_at(*t, tol))
            .collect::<Result<Vec<f64>>>()
            .map_err(|e| data!("level n = {n}: {e}"))?;
        let mut s = 0.0;
        for st in raw_stencils(&stencil_scheme, &p)? {
            let y: f64 = st.idx.iter().zip(&st.weights).map(|(i, w)| w * values[*i]).sum();
            s += y * y;
        }
        statistics.push(s);
    }
    hurst_from_statistics(levels, &statistics, scheme)
}

/// `C_H = E|N|^{1/H}` for a standard normal `N`, by adaptive quadrature of
/// `2 ∫₀^∞ x^p φ(x) dx`.
pub fn alpha_limit_constant(hurst: f64) -> Result<f64> {
    if !(hurst > 0.0 && hurst < 1.0) {
        return Err(usage!("H = {hurst} must lie in (0, 1)"));
    }
    let p = 1.0 / hurst;
    let density = 1.0 / sqrt(2.0 * core::f64::consts::PI);
    let f = |x: f64| if x == 0.0 { 0.0 } else { 2.0 * density * exp(p * libm::log(x) - 0.5 * x * x) };
    // The integrand peaks at √p and is negligible 40 units beyond it.
    let mode = sqrt(p);
    let upper = mode + 40.0;
    Ok(quadrature::integrate(f, 0.0, mode, 1e-13) + quadrature::integrate(f, mode, upper, 1e-13))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::montecarlo::PathSampler;
    use crate::schemes::Phi;
    use crate::Error;
    use alloc::vec;

    fn closed_form(p: f64) -> f64 {
        pow(2.0, p / 2.0) * libm::tgamma((p + 1.0) / 2.0) / sqrt(core::f64::consts::PI)
    }

    #[test]
    fn alpha_constant_examples() {
        assert!((alpha_limit_constant(0.5).unwrap() - 1.0).abs() < 1e-12);
        assert!((alpha_limit_constant(0.25).unwrap() - 3.0).abs() < 1e-11);
        let c = alpha_limit_constant(0.75).unwrap();
        assert!((c / closed_form(4.0 / 3.0) - 1.0).abs() < 1e-10);
        assert!(matches!(alpha_limit_constant(1.0), Err(Error::Usage(_))));
        assert!(matches!(alpha_limit_constant(0.0), Err(Error::Usage(_))));
    }

    #[test]
    fn alpha_constant_matches_closed_form() {
        for i in 0..20 {
            let h = 0.04 + 0.048 * i as f64;
            let c = alpha_limit_constant(h).unwrap();
            let oracle = closed_form(1.0 / h);
            assert!((c / oracle - 1.0).abs() < 1e-10, "H = {h}: {c} vs {oracle}");
        }
    }

    #[test]
    fn realized_examples() {
        let one = DifferenceScheme::FirstOrder(Phi::One);
        let path = PathSample::new(vec![0.0, 0.5, 1.0], vec![0.0, 0.5, 1.0]).unwrap();
        let p = make_uniform(2, 1.0).unwrap();
        assert!((realized_stat(&path, &one, &p, 2.0, None).unwrap() - 0.5).abs() < 1e-15);

        let flat = PathSample::new((0..=8).map(|k| k as f64 / 8.0).collect(), vec![3.0; 9]).unwrap();
        let bm = KernelSpec::brownian(1.0).unwrap();
        let p8 = make_uniform(8, 1.0).unwrap();
        for scheme in [
            one.clone(),
            DifferenceScheme::SecondOrderBegyn,
            DifferenceScheme::general_a(vec![1.0, -2.0, 1.0], None).unwrap(),
        ] {
            assert_eq!(realized_stat(&flat, &scheme, &p8, 1.5, Some(&bm)).unwrap(), 0.0);
        }
        assert!(matches!(
            realized_stat(&flat, &DifferenceScheme::SecondOrderBegyn, &p8, 2.0, None),
            Err(Error::Usage(_))
        ));
        assert!(matches!(realized_stat(&path, &one, &p8, 2.0, None), Err(Error::Data(_))));
        assert!(matches!(realized_stat(&path, &one, &p, 0.5, None), Err(Error::Usage(_))));
    }

    #[test]
    fn realized_quadratic_equals_direct_sum() {
        let bm = KernelSpec::brownian(1.0).unwrap();
        let p = make_uniform(500, 1.0).unwrap();
        let path = PathSampler::new(&bm, &p, 1e-10).unwrap().sample(11, 0);
        let direct: f64 = path.values().windows(2).map(|w| (w[1] - w[0]) * (w[1] - w[0])).sum();
        let v = realized_stat(&path, &DifferenceScheme::FirstOrder(Phi::One), &p, 2.0, None).unwrap();
        assert!((v - direct).abs() <= 1e-12 * direct);
        // Coarser partition of the same path.
        let coarse = make_uniform(100, 1.0).unwrap();
        assert!(realized_stat(&path, &DifferenceScheme::FirstOrder(Phi::One), &coarse, 2.0, None).is_ok());
    }

    #[test]
    fn synthetic_power_law_is_exact() {
        let levels: Vec<usize> = (4..=12).map(|j| 1usize << j).collect();
        for h0 in [0.1, 0.3, 0.5, 0.7, 0.9] {
            let stats: Vec<f64> = levels.iter().map(|n| pow(*n as f64, 1.0 - 2.0 * h0)).collect();
            let r = hurst_from_statistics(&levels, &stats, &DifferenceScheme::FirstOrder(Phi::One)).unwrap();
            assert!((r.hurst - h0).abs() < 1e-13, "{h0}: {}", r.hurst);
            assert!(r.residual >= 0.0 && r.residual < 1e-12);
        }
        let stats: Vec<f64> = levels.iter().map(|n| pow(*n as f64, -1.0 - 2.0 * 0.7)).collect();
        let r = hurst_from_statistics(&levels, &stats, &DifferenceScheme::SecondOrderBegyn).unwrap();
        assert!((r.hurst - 0.7).abs() < 1e-13);
    }

    #[test]
    fn linear_path_has_index_one() {
        let n = 1024;
        let times: Vec<f64> = (0..=n).map(|k| k as f64 / n as f64).collect();
        let values = times.iter().map(|t| 3.0 * t).collect();
        let path = PathSample::new(times, values).unwrap();
        let r = hurst_estimate(&path, &[16, 64, 256, 1024], &DifferenceScheme::FirstOrder(Phi::One)).unwrap();
        assert!((r.hurst - 1.0).abs() < 1e-12);
    }

    #[test]
    fn estimate_errors() {
        let path = PathSample::new(vec![0.0, 0.5, 1.0], vec![0.0, 1.0, 0.0]).unwrap();
        let one = DifferenceScheme::FirstOrder(Phi::One);
        assert!(matches!(hurst_estimate(&path, &[2], &one), Err(Error::Usage(_))));
        assert!(matches!(hurst_estimate(&path, &[1, 4], &one), Err(Error::Data(_))));
        assert!(matches!(hurst_estimate(&path, &[1, 3], &one), Err(Error::Data(_))));
        assert!(PathSample::new(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(PathSample::new(vec![0.0], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn simulated_brownian_and_scale_invariance() {
        let bm = KernelSpec::brownian(1.0).unwrap();
        let p = make_uniform(4096, 1.0).unwrap();
        let path = PathSampler::new(&bm, &p, 1e-10).unwrap().sample(42, 0);
        let levels: Vec<usize> = (8..=12).map(|j| 1usize << j).collect();
        for scheme in [
            DifferenceScheme::FirstOrder(Phi::One),
            DifferenceScheme::SecondOrderBegyn,
            DifferenceScheme::general_a(vec![1.0, -2.0, 1.0], Some(1.0 / 4096.0)).unwrap(),
        ] {
            let r = hurst_estimate(&path, &levels, &scheme).unwrap();
            assert!((r.hurst - 0.5).abs() < 0.05, "{scheme:?}: {}", r.hurst);
            let scaled = hurst_estimate(&path.scaled(7.5), &levels, &scheme).unwrap();
            assert!((scaled.hurst - r.hurst).abs() < 1e-12);
        }
    }

    #[test]
    fn simulated_rough_fbm() {
        let k = KernelSpec::fbm(0.3, 1.0).unwrap();
        let p = make_uniform(1024, 1.0).unwrap();
        let path = PathSampler::new(&k, &p, 1e-10).unwrap().sample(7, 0);
        let levels: Vec<usize> = (6..=10).map(|j| 1usize << j).collect();
        let r = hurst_estimate(&path, &levels, &DifferenceScheme::FirstOrder(Phi::One)).unwrap();
        assert!((r.hurst - 0.3).abs() < 0.05, "{}", r.hurst);
    }
}
