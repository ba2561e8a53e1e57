//! Partitions `0 = t_0 < t_1 < … < t_N = T` and their mesh statistics.

use alloc::vec::Vec;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};

use crate::error::{data, usage};
use crate::limits::{classify_trend, Trend};
use crate::Result;

/// Strictly increasing grid on `[0, T]` with cached mesh metrics.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Partition {
    points: Vec<f64>,
    mesh: f64,
    min_mesh: f64,
}

impl Partition {
    /// Validates an explicit list of points; the first must be `0`.
    pub fn from_points(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(usage!("a partition needs at least two points"));
        }
        if points.iter().any(|t| !t.is_finite()) {
            return Err(data!("partition points must be finite"));
        }
        if points[0] != 0.0 {
            return Err(data!("partition must start at 0, got {}", points[0]));
        }
        let mut mesh = 0.0f64;
        let mut min_mesh = f64::INFINITY;
        for (k, w) in points.windows(2).enumerate() {
            let gap = w[1] - w[0];
            if !(gap > 0.0) {
                return Err(data!("partition not strictly increasing at index {}", k + 1));
            }
            mesh = mesh.max(gap);
            min_mesh = min_mesh.min(gap);
        }
        Ok(Self { points, mesh, min_mesh })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn horizon(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    /// `|π_n|`, the largest gap.
    pub fn mesh(&self) -> f64 {
        self.mesh
    }

    /// `m(π_n)`, the smallest gap.
    pub fn min_mesh(&self) -> f64 {
        self.min_mesh
    }

    /// `N(π_n)`, the number of points.
    pub fn count(&self) -> usize {
        self.points.len()
    }

    /// Number of intervals, `N(π_n) − 1`.
    pub fn steps(&self) -> usize {
        self.points.len() - 1
    }

    /// `Δt_k = t_k − t_{k−1}` for `k = 1..N−1`.
    pub fn gaps(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.windows(2).map(|w| w[1] - w[0])
    }

    /// `|π_n| / m(π_n) ≥ 1`.
    pub fn ratio(&self) -> f64 {
        self.mesh / self.min_mesh
    }

    /// Uniform step if all gaps agree to `rel_tol`.
    pub fn uniform_step(&self, rel_tol: f64) -> Option<f64> {
        let h = self.horizon() / self.steps() as f64;
        self.gaps().all(|g| (g - h).abs() <= rel_tol * h).then_some(h)
    }
}

fn check_horizon(horizon: f64) -> Result<()> {
    if horizon.is_finite() && horizon > 0.0 {
        Ok(())
    } else {
        Err(usage!("horizon {horizon} must be positive"))
    }
}

fn uniform_point(k: usize, n: usize, horizon: f64) -> f64 {
    if k == n {
        horizon
    } else {
        k as f64 * horizon / n as f64
    }
}

/// `t_k = kT/n`, `k = 0..n`.
pub fn make_uniform(n: usize, horizon: f64) -> Result<Partition> {
    if n == 0 {
        return Err(usage!("uniform partition needs n ≥ 1"));
    }
    check_horizon(horizon)?;
    Partition::from_points((0..=n).map(|k| uniform_point(k, n, horizon)).collect())
}

/// Uniform grid with every interior point jittered independently.
///
/// With step `h = T/n` each interior point moves by at most
/// `δ = h(c−1)/(2(c+1))`, so every gap lies in `[h−2δ, h+2δ]` and
/// `mesh/min_mesh ≤ (h+2δ)/(h−2δ) = c` holds without rejection.
pub fn make_perturbed(n: usize, horizon: f64, ratio_cap: f64, seed: u64) -> Result<Partition> {
    if !(ratio_cap >= 1.0) || !ratio_cap.is_finite() {
        return Err(usage!("ratio cap {ratio_cap} must be a finite number ≥ 1"));
    }
    let base = make_uniform(n, horizon)?;
    if ratio_cap == 1.0 || n == 1 {
        return Ok(base);
    }
    let h = horizon / n as f64;
    let delta = h * (ratio_cap - 1.0) / (2.0 * (ratio_cap + 1.0));
    let jitter = Uniform::new_inclusive(-delta, delta).map_err(|e| usage!("{e}"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = base.points;
    for t in &mut points[1..n] {
        *t += jitter.sample(&mut rng);
    }
    Partition::from_points(points)
}

/// One entry of a refinement schedule: `n`, the mesh and `mesh · log n`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct MeshLevel {
    pub n: usize,
    pub mesh: f64,
    pub mesh_logn: f64,
}

/// Mesh of `uniform(2^j)` for `j` in `exponents`, and whether
/// `mesh · log n` trends to zero along the schedule.
pub fn dyadic_mesh_schedule(exponents: core::ops::RangeInclusive<u32>, horizon: f64) -> Result<(Vec<MeshLevel>, Trend)> {
    let levels: Vec<MeshLevel> = exponents
        .map(|j| {
            let n = 1usize << j;
            let p = make_uniform(n, horizon)?;
            Ok(MeshLevel { n, mesh: p.mesh(), mesh_logn: p.mesh() * libm::log(n as f64) })
        })
        .collect::<Result<_>>()?;
    let ns: Vec<usize> = levels.iter().map(|l| l.n).collect();
    let values: Vec<f64> = levels.iter().map(|l| l.mesh_logn).collect();
    let trend = classify_trend(&ns, &values)?;
    Ok((levels, trend))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Error;
    use alloc::vec;

    #[test]
    fn uniform_examples() {
        let p = make_uniform(4, 1.0).unwrap();
        assert_eq!(p.points(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(p.mesh(), 0.25);
        let p = make_uniform(1, 2.0).unwrap();
        assert_eq!(p.points(), &[0.0, 2.0]);
        assert_eq!(p.mesh(), 2.0);
        let p = make_uniform(10, 1.0).unwrap();
        assert!((p.mesh() - 0.1).abs() < 1e-15 && (p.min_mesh() - 0.1).abs() < 1e-15);
        assert!((make_uniform(5, 1.0).unwrap().ratio() - 1.0).abs() < 1e-12);
        assert_eq!(make_uniform(8, 1.0).unwrap().ratio(), 1.0);
        assert!(matches!(make_uniform(0, 1.0), Err(Error::Usage(_))));
    }

    #[test]
    fn ratio_arithmetic() {
        let p = Partition::from_points(vec![0.0, 0.1, 0.3, 1.0]).unwrap();
        assert!((p.ratio() - 7.0).abs() < 1e-12);
        assert_eq!(p.count(), 4);
        assert_eq!(p.steps(), 3);
    }

    #[test]
    fn perturbed_contract() {
        assert_eq!(make_perturbed(8, 1.0, 1.0, 3).unwrap(), make_uniform(8, 1.0).unwrap());
        let p = make_perturbed(8, 1.0, 2.0, 7).unwrap();
        assert!(p.ratio() <= 2.0);
        assert_eq!(p, make_perturbed(8, 1.0, 2.0, 7).unwrap());
        assert_ne!(p, make_uniform(8, 1.0).unwrap());
        assert!(matches!(make_perturbed(8, 1.0, 0.5, 7), Err(Error::Usage(_))));
        for (n, cap, seed) in [(2, 1.5, 1), (100, 1.01, 2), (1000, 4.0, 3), (37, 10.0, 4)] {
            let p = make_perturbed(n, 3.0, cap, seed).unwrap();
            assert!(p.ratio() <= cap * (1.0 + 1e-12), "{n} {cap}: {}", p.ratio());
            assert_eq!(*p.points().last().unwrap(), 3.0);
        }
    }

    #[test]
    fn bad_points() {
        assert!(Partition::from_points(vec![0.0]).is_err());
        assert!(matches!(Partition::from_points(vec![0.1, 1.0]), Err(Error::Data(_))));
        assert!(matches!(Partition::from_points(vec![0.0, 0.5, 0.5, 1.0]), Err(Error::Data(_))));
    }

    #[test]
    fn dyadic_schedule_mesh_beats_log() {
        let (levels, trend) = dyadic_mesh_schedule(2..=12, 1.0).unwrap();
        assert_eq!(levels.len(), 11);
        assert_eq!(levels[0].n, 4);
        assert!(trend.decreasing && trend.tail_slope < 0.0);
    }

    proptest::proptest! {
        #[test]
        fn uniform_nesting(n in 1usize..300, t in 0.1f64..10.0) {
            let coarse = make_uniform(n, t).unwrap();
            let fine = make_uniform(2 * n, t).unwrap();
            for (k, x) in coarse.points().iter().enumerate() {
                proptest::prop_assert_eq!(*x, fine.points()[2 * k]);
            }
        }

        #[test]
        fn gaps_sum_to_horizon(n in 1usize..500, t in 0.1f64..10.0, cap in 1.0f64..5.0, seed in 0u64..1000) {
            for p in [make_uniform(n, t).unwrap(), make_perturbed(n, t, cap, seed).unwrap()] {
                let total: f64 = p.gaps().sum();
                proptest::prop_assert!((total - t).abs() <= 1e-12 * t);
                proptest::prop_assert!(p.ratio() <= cap * (1.0 + 1e-12));
                proptest::prop_assert!(p.mesh() >= p.min_mesh());
            }
        }
    }
}
