//! Difference schemes: from process values along a partition to the
//! Gaussian vector `Y` and its exact covariance matrix `Γ`.
//!
//! * first order: `Y_k = (X_{t_k} − X_{t_{k−1}}) / √φ(Δt_k)`;
//! * second order (Begyn): `Y_k = √Δt_{k+1} · ΔX_k / √E(ΔX_k)²` with
//!   `ΔX_k = Δt_{k+1} X_{t_{k−1}} + Δt_k X_{t_{k+1}} − (Δt_{k+1}+Δt_k) X_{t_k}`;
//! * general `a`-differences: `Y_j = Δ_a X_j / √(n E(Δ_a X_j)²)` on a
//!   uniform grid, so that `Σ Y_j²` is the normalized `a`-variation.
//!
//! All stencils have zero-sum weights, so covariances are evaluated from
//! incremental variances only (see [`KernelSpec::zero_sum_cov`]).

use alloc::vec::Vec;
use libm::{exp, fabs, log, pow, sqrt};

use crate::error::{config, data, usage};
use crate::kernels::KernelSpec;
use crate::partitions::Partition;
use crate::{CovMatrix, Error, Result};

/// Positive scaling function `φ` of the first-order variation.
#[derive(Debug, Clone, PartialEq)]
pub enum Phi {
    /// `φ(x) = x^γ`.
    PowerGamma(f64),
    /// `φ ≡ 1`.
    One,
    Custom(TabulatedPhi),
}

/// `φ` tabulated at increasing abscissae, interpolated linearly in
/// log-log coordinates. Outside the table the end segments are extended.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedPhi {
    log_x: Vec<f64>,
    log_y: Vec<f64>,
}

impl TabulatedPhi {
    pub fn new(x: &[f64], y: &[f64]) -> Result<Self> {
        if x.len() != y.len() || x.len() < 2 {
            return Err(usage!("tabulated φ needs at least two (x, φ(x)) pairs of equal length"));
        }
        if x.iter().chain(y).any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(config!("tabulated φ needs positive finite abscissae and values"));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(config!("tabulated φ abscissae must be strictly increasing"));
        }
        Ok(Self {
            log_x: x.iter().map(|v| log(*v)).collect(),
            log_y: y.iter().map(|v| log(*v)).collect(),
        })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let lx = log(x);
        let last = self.log_x.len() - 1;
        let seg = self.log_x.partition_point(|v| *v <= lx).clamp(1, last);
        let (x0, x1) = (self.log_x[seg - 1], self.log_x[seg]);
        let (y0, y1) = (self.log_y[seg - 1], self.log_y[seg]);
        exp(y0 + (y1 - y0) * (lx - x0) / (x1 - x0))
    }
}

impl Phi {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Phi::PowerGamma(g) => pow(x, *g),
            Phi::One => 1.0,
            Phi::Custom(t) => t.eval(x),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DifferenceScheme {
    FirstOrder(Phi),
    SecondOrderBegyn,
    /// Zero-sum weights `a = (a_0, …, a_p)`; `step`, when given, must equal
    /// the uniform step of the partition the scheme is applied to.
    GeneralA { weights: Vec<f64>, step: Option<f64> },
}

impl DifferenceScheme {
    pub fn first_order_power(gamma: f64) -> Result<Self> {
        if !gamma.is_finite() {
            return Err(config!("power exponent {gamma} must be finite"));
        }
        Ok(Self::FirstOrder(Phi::PowerGamma(gamma)))
    }

    pub fn general_a(weights: Vec<f64>, step: Option<f64>) -> Result<Self> {
        if weights.len() < 2 {
            return Err(config!("a-differences need at least two weights"));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(config!("a-difference weights must be finite"));
        }
        let scale = weights.iter().fold(1.0f64, |m, w| m.max(fabs(*w)));
        let sum: f64 = weights.iter().sum();
        if fabs(sum) > 1e-14 * scale {
            return Err(config!("a-difference weights sum to {sum}, not 0"));
        }
        if let Some(s) = step {
            if !(s.is_finite() && s > 0.0) {
                return Err(config!("a-difference step {s} must be positive"));
            }
        }
        Ok(Self::GeneralA { weights, step })
    }

    /// Whether the normalization needs the covariance kernel.
    pub fn needs_kernel(&self) -> bool {
        !matches!(self, Self::FirstOrder(_))
    }
}

/// `Y_k = Σ_i weights[i] · X_{times[i]}`, normalization included.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightRow {
    pub times: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Raw stencil rows (no normalization), as point indices and weights.
pub(crate) struct Stencil {
    pub idx: Vec<usize>,
    pub weights: Vec<f64>,
}

/// The unnormalized stencils of `scheme` on `p`.
pub(crate) fn raw_stencils(scheme: &DifferenceScheme, p: &Partition) -> Result<Vec<Stencil>> {
    let t = p.points();
    let n_points = t.len();
    match scheme {
        DifferenceScheme::FirstOrder(_) => Ok((1..n_points)
            .map(|k| Stencil { idx: alloc::vec![k - 1, k], weights: alloc::vec![-1.0, 1.0] })
            .collect()),
        DifferenceScheme::SecondOrderBegyn => {
            if n_points < 3 {
                return Err(usage!("second-order differences need at least 3 points, got {n_points}"));
            }
            Ok((1..n_points - 1)
                .map(|k| {
                    let dk = t[k] - t[k - 1];
                    let dk1 = t[k + 1] - t[k];
                    Stencil { idx: alloc::vec![k - 1, k, k + 1], weights: alloc::vec![dk1, -(dk1 + dk), dk] }
                })
                .collect())
        }
        DifferenceScheme::GeneralA { weights, step } => {
            let order = weights.len() - 1;
            let steps = p.steps();
            if steps < order {
                return Err(usage!("stencil of order {order} exceeds the {steps} steps of the partition"));
            }
            let h = p
                .uniform_step(1e-9)
                .ok_or_else(|| usage!("a-differences need a uniform partition"))?;
            if let Some(s) = step {
                if fabs(s - h) > 1e-9 * h {
                    return Err(usage!("scheme step {s} differs from the partition step {h}"));
                }
            }
            Ok((0..=steps - order)
                .map(|j| Stencil { idx: (j..=j + order).collect(), weights: weights.clone() })
                .collect())
        }
    }
}

fn stencil_times(p: &Partition, s: &Stencil) -> Vec<f64> {
    s.idx.iter().map(|&i| p.points()[i]).collect()
}

/// Rows encoding each `Y_k` as a combination of process values.
///
/// `kernel` is required by the second-order and `a`-difference schemes,
/// whose normalization is the exact variance of the raw difference.
pub fn weight_rows(
    scheme: &DifferenceScheme,
    p: &Partition,
    kernel: Option<&KernelSpec>,
) -> Result<Vec<WeightRow>> {
    let stencils = raw_stencils(scheme, p)?;
    let mut rows = Vec::with_capacity(stencils.len());
    let n_steps = p.steps() as f64;
    for (k, s) in stencils.iter().enumerate() {
        let times = stencil_times(p, s);
        let scale = match scheme {
            DifferenceScheme::FirstOrder(phi) => {
                let gap = times[1] - times[0];
                let v = phi.eval(gap);
                if !(v.is_finite() && v > 0.0) {
                    return Err(config!("φ({gap}) = {v} is not positive"));
                }
                1.0 / sqrt(v)
            }
            DifferenceScheme::SecondOrderBegyn | DifferenceScheme::GeneralA { .. } => {
                let kernel = kernel.ok_or_else(|| usage!("this scheme needs a kernel for its normalization"))?;
                let var = kernel.zero_sum_cov(&times, &s.weights, &times, &s.weights)?;
                if !(var > 0.0) {
                    return Err(Error::DegenerateKernel(alloc::format!(
                        "difference {k} has variance {var}"
                    )));
                }
                match scheme {
                    DifferenceScheme::SecondOrderBegyn => sqrt((times[2] - times[1]) / var),
                    _ => 1.0 / sqrt(n_steps * var),
                }
            }
        };
        rows.push(WeightRow { times, weights: s.weights.iter().map(|w| w * scale).collect() });
    }
    Ok(rows)
}

/// `Γ_jk = E[Y_j Y_k]` for the scheme applied to `kernel` along `p`.
pub fn build_gamma(scheme: &DifferenceScheme, p: &Partition, kernel: &KernelSpec) -> Result<CovMatrix> {
    let rows = weight_rows(scheme, p, Some(kernel))?;
    CovMatrix::from_lower(rows.len(), |i, j| {
        let (a, b) = (&rows[i], &rows[j]);
        kernel.zero_sum_cov(&a.times, &a.weights, &b.times, &b.weights)
    })
}

/// Dense rectangular matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl CrossMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn sum_of_squares(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }
}

/// `E[Y_k^{(n)} Y_j^{(m)}]` between two levels of refinement.
pub fn build_cross_gamma(
    scheme: &DifferenceScheme,
    p_n: &Partition,
    p_m: &Partition,
    kernel: &KernelSpec,
) -> Result<CrossMatrix> {
    let rows_n = weight_rows(scheme, p_n, Some(kernel))?;
    let rows_m = weight_rows(scheme, p_m, Some(kernel))?;
    let mut data = Vec::with_capacity(rows_n.len() * rows_m.len());
    for a in &rows_n {
        for b in &rows_m {
            data.push(kernel.zero_sum_cov(&a.times, &a.weights, &b.times, &b.weights)?);
        }
    }
    if data.iter().any(|x| !x.is_finite()) {
        return Err(data!("cross covariance has non-finite entries"));
    }
    Ok(CrossMatrix { rows: rows_n.len(), cols: rows_m.len(), data })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partitions::{make_perturbed, make_uniform};
    use crate::SymmetricEigen;
    use alloc::vec;

    fn rho(h: f64, r: f64) -> f64 {
        0.5 * (pow(fabs(r + 1.0), 2.0 * h) - 2.0 * pow(fabs(r), 2.0 * h) + pow(fabs(r - 1.0), 2.0 * h))
    }

    #[test]
    fn general_a_first_difference_stencil() {
        let p = make_uniform(4, 1.0).unwrap();
        let scheme = DifferenceScheme::general_a(vec![-1.0, 1.0], None).unwrap();
        let st = raw_stencils(&scheme, &p).unwrap();
        assert_eq!(st.len(), 4);
        assert_eq!(st[2].idx, vec![2, 3]);
        assert_eq!(st[2].weights, vec![-1.0, 1.0]);
    }

    #[test]
    fn begyn_uniform_stencil() {
        let h = 0.125;
        let p = make_uniform(8, 1.0).unwrap();
        let st = raw_stencils(&DifferenceScheme::SecondOrderBegyn, &p).unwrap();
        assert_eq!(st.len(), 7);
        assert_eq!(st[0].weights, vec![h, -2.0 * h, h]);
        assert_eq!(st[6].idx, vec![6, 7, 8]);
    }

    #[test]
    fn begyn_brownian_variance() {
        // E[h(W_{k+1} − 2W_k + W_{k−1})]² = h²·2h.
        let bm = KernelSpec::brownian(1.0).unwrap();
        let p = make_uniform(16, 1.0).unwrap();
        let h = 1.0 / 16.0;
        for s in raw_stencils(&DifferenceScheme::SecondOrderBegyn, &p).unwrap() {
            let t = stencil_times(&p, &s);
            let v = bm.weighted_difference_cov(&t, &s.weights, &t, &s.weights).unwrap();
            assert!((v - 2.0 * h * h * h).abs() < 1e-17);
        }
    }

    #[test]
    fn brownian_first_order_is_scaled_identity() {
        let bm = KernelSpec::brownian(1.0).unwrap();
        let n = 32;
        let g = build_gamma(&DifferenceScheme::FirstOrder(Phi::One), &make_uniform(n, 1.0).unwrap(), &bm).unwrap();
        for i in 0..n {
            for j in 0..n {
                let expect = if i == j { 1.0 / n as f64 } else { 0.0 };
                assert!((g.get(i, j) - expect).abs() < 1e-15);
            }
        }
        let p = make_perturbed(20, 1.0, 3.0, 1).unwrap();
        let g = build_gamma(&DifferenceScheme::FirstOrder(Phi::One), &p, &bm).unwrap();
        for i in 0..20 {
            for j in 0..20 {
                if i != j {
                    assert_eq!(g.get(i, j), 0.0);
                }
            }
        }
    }

    #[test]
    fn fbm_first_order_is_toeplitz_fgn() {
        for h in [0.3, 0.6, 0.9] {
            let k = KernelSpec::fbm(h, 1.0).unwrap();
            let n = 24;
            let scheme = DifferenceScheme::first_order_power(2.0 * h - 1.0).unwrap();
            let g = build_gamma(&scheme, &make_uniform(n, 1.0).unwrap(), &k).unwrap();
            for i in 0..n {
                for j in 0..n {
                    let expect = rho(h, j as f64 - i as f64) / n as f64;
                    assert!((g.get(i, j) - expect).abs() < 1e-13, "{h} {i} {j}");
                }
            }
        }
    }

    #[test]
    fn fbm_energy_is_horizon_on_any_partition() {
        let k = KernelSpec::fbm(0.7, 2.0).unwrap();
        let scheme = DifferenceScheme::first_order_power(0.4).unwrap();
        let p = make_perturbed(50, 2.0, 3.0, 9).unwrap();
        let g = build_gamma(&scheme, &p, &k).unwrap();
        for (i, gap) in p.gaps().enumerate() {
            assert!((g.get(i, i) - gap).abs() < 1e-14);
        }
        assert!((g.trace() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn bifbm_with_k_one_matches_fbm() {
        // Entries are second differences of O(1) values, so agreement is
        // limited by rounding in those values, not by the kernel.
        let p = make_perturbed(128, 1.0, 3.0, 12).unwrap();
        for h in [0.3, 0.5, 0.8] {
            let scheme = DifferenceScheme::first_order_power(2.0 * h - 1.0).unwrap();
            let a = build_gamma(&scheme, &p, &KernelSpec::bifbm(h, 1.0, 1.0).unwrap()).unwrap();
            let b = build_gamma(&scheme, &p, &KernelSpec::fbm(h, 1.0).unwrap()).unwrap();
            let scale = b.as_slice().iter().fold(0.0f64, |m, x| m.max(fabs(*x)));
            for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
                assert!(fabs(x - y) <= 1e-10 * scale, "H = {h}");
            }
            assert!(fabs(a.trace() - b.trace()) <= 1e-13 * b.trace());
        }
    }

    #[test]
    fn normalized_diagonals() {
        let p = make_perturbed(40, 1.0, 2.0, 4).unwrap();
        let k = KernelSpec::sub_fbm(0.35, 1.0).unwrap();
        let g = build_gamma(&DifferenceScheme::SecondOrderBegyn, &p, &k).unwrap();
        let gaps: Vec<f64> = p.gaps().collect();
        for kk in 0..g.dim() {
            assert!((g.get(kk, kk) - gaps[kk + 1]).abs() <= 1e-12 * gaps[kk + 1]);
        }
        let u = make_uniform(40, 1.0).unwrap();
        let scheme = DifferenceScheme::general_a(vec![1.0, -3.0, 3.0, -1.0], Some(0.025)).unwrap();
        let g = build_gamma(&scheme, &u, &k).unwrap();
        assert_eq!(g.dim(), 38);
        for j in 0..g.dim() {
            assert!((g.get(j, j) - 1.0 / 40.0).abs() <= 1e-12 / 40.0);
        }
    }

    #[test]
    fn general_a_is_proportional_to_first_order() {
        let k = KernelSpec::fbm(0.65, 1.0).unwrap();
        let n = 30;
        let u = make_uniform(n, 1.0).unwrap();
        let a = build_gamma(&DifferenceScheme::general_a(vec![-1.0, 1.0], Some(1.0 / 30.0)).unwrap(), &u, &k).unwrap();
        let f = build_gamma(&DifferenceScheme::FirstOrder(Phi::One), &u, &k).unwrap();
        let ratio = a.get(0, 0) / f.get(0, 0);
        for i in 0..n {
            for j in 0..n {
                if f.get(i, j).abs() > 1e-300 {
                    assert!((a.get(i, j) / f.get(i, j) - ratio).abs() <= 1e-12 * ratio);
                }
            }
        }
    }

    #[test]
    fn gamma_is_psd() {
        let p = make_perturbed(60, 1.0, 2.0, 5).unwrap();
        let kernels = [
            KernelSpec::fbm(0.2, 1.0).unwrap(),
            KernelSpec::fbm(0.9, 1.0).unwrap(),
            KernelSpec::bifbm(0.4, 1.5, 1.0).unwrap(),
        ];
        for k in &kernels {
            for scheme in [DifferenceScheme::FirstOrder(Phi::One), DifferenceScheme::SecondOrderBegyn] {
                let g = build_gamma(&scheme, &p, k).unwrap();
                let ev = SymmetricEigen::eigenvalues(g.as_slice(), g.dim()).unwrap();
                let top = ev[0].abs();
                assert!(ev.iter().all(|x| *x >= -1e-10 * top));
            }
        }
    }

    #[test]
    fn cross_gamma_examples() {
        let bm = KernelSpec::brownian(1.0).unwrap();
        let one = DifferenceScheme::FirstOrder(Phi::One);
        let p1 = make_uniform(1, 1.0).unwrap();
        let p2 = make_uniform(2, 1.0).unwrap();
        let c = build_cross_gamma(&one, &p1, &p2, &bm).unwrap();
        assert_eq!((c.rows, c.cols), (1, 2));
        assert!((c.get(0, 0) - 0.5).abs() < 1e-15 && (c.get(0, 1) - 0.5).abs() < 1e-15);
        let p4 = make_uniform(4, 1.0).unwrap();
        let same = build_cross_gamma(&one, &p4, &p4, &bm).unwrap();
        let g = build_gamma(&one, &p4, &bm).unwrap();
        assert_eq!(same.data, g.as_slice());
        let p_left = Partition::from_points(vec![0.0, 0.5, 1.0]).unwrap();
        let c = build_cross_gamma(&one, &p_left, &p4, &bm).unwrap();
        // [0, 0.5] is disjoint from [0.5, 0.75] and [0.75, 1].
        assert_eq!(c.get(0, 2), 0.0);
        assert_eq!(c.get(0, 3), 0.0);
    }

    #[test]
    fn scheme_errors() {
        let bm = KernelSpec::brownian(1.0).unwrap();
        let p = make_uniform(1, 1.0).unwrap();
        assert!(matches!(build_gamma(&DifferenceScheme::SecondOrderBegyn, &p, &bm), Err(Error::Usage(_))));
        assert!(matches!(DifferenceScheme::general_a(vec![1.0, -0.5], None), Err(Error::Config(_))));
        let u = make_uniform(10, 1.0).unwrap();
        let wrong = DifferenceScheme::general_a(vec![1.0, -1.0], Some(0.2)).unwrap();
        assert!(matches!(build_gamma(&wrong, &u, &bm), Err(Error::Usage(_))));
        let long = DifferenceScheme::general_a(vec![1.0, -2.0, 1.0], None).unwrap();
        assert!(matches!(build_gamma(&long, &make_uniform(1, 1.0).unwrap(), &bm), Err(Error::Usage(_))));
        let irregular = make_perturbed(10, 1.0, 2.0, 3).unwrap();
        let a = DifferenceScheme::general_a(vec![1.0, -1.0], None).unwrap();
        assert!(matches!(build_gamma(&a, &irregular, &bm), Err(Error::Usage(_))));
        assert!(matches!(weight_rows(&DifferenceScheme::SecondOrderBegyn, &u, None), Err(Error::Usage(_))));
        // All values at grid times are zero for this tabulated kernel.
        let table = crate::kernels::TabulatedGram::new(vec![0.0, 0.5, 1.0], vec![0.0; 9]).unwrap();
        let flat = KernelSpec::tabulated(table).unwrap();
        let p2 = make_uniform(2, 1.0).unwrap();
        assert!(matches!(build_gamma(&DifferenceScheme::SecondOrderBegyn, &p2, &flat), Err(Error::DegenerateKernel(_))));
    }

    #[test]
    fn tabulated_phi_interpolates_power_laws_exactly() {
        let xs = [1e-4, 1e-2, 1.0];
        let ys: Vec<f64> = xs.iter().map(|x| pow(*x, 0.4)).collect();
        let phi = TabulatedPhi::new(&xs, &ys).unwrap();
        for x in [1e-5, 3e-4, 0.05, 0.7, 2.0] {
            assert!((phi.eval(x) / pow(x, 0.4) - 1.0).abs() < 1e-12);
        }
        assert!(TabulatedPhi::new(&[1.0, 0.5], &[1.0, 1.0]).is_err());
    }
}
