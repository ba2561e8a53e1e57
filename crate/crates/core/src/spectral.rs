//! Norms, eigenvalues and exact moments of the quadratic variation
//! `V = Σ_k Y_k²` of a centred Gaussian vector with covariance `Γ`.
//!
//! With `λ_k` the eigenvalues of `Γ`, `V − E V = Σ λ_k (ξ_k² − 1)` for iid
//! standard normals `ξ_k`, so the cumulants are `κ_r = 2^{r−1}(r−1)! Σλ^r`
//! and in particular
//!
//! ```text
//! Var V       = 2 Σλ²                  = 2 trace(Γ²)
//! E(V − EV)⁴ = 12 (Σλ²)² + 48 Σλ⁴     = 12 trace(Γ²)² + 48 trace(Γ⁴)
//! ```
//!
//! [`isserlis_oracle`] recomputes both moments by brute-force Wick pairing
//! enumeration; the test suite uses it to pin [`FOURTH_MOMENT_TRACE_COEFF`].

use alloc::vec;
use alloc::vec::Vec;
use libm::{fabs, sqrt};

use crate::error::usage;
use crate::linalg::{matmul, SymmetricEigen};
use crate::{CovMatrix, Error, Result};

/// Coefficient of `trace(Γ⁴)` in the fourth central moment of `V`.
///
/// Fixed by agreement with the Wick enumeration; the `χ²₁` case
/// (`E(ξ²−1)⁴ = 60 = 12 + c`) already forces `c = 48`.
pub const FOURTH_MOMENT_TRACE_COEFF: f64 = 48.0;

/// Largest dimension accepted by [`isserlis_oracle`].
pub const ORACLE_MAX_DIM: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NormReport {
    pub trace: f64,
    pub frobenius: f64,
    /// Largest absolute eigenvalue, `‖Γ‖₂`.
    pub spectral: f64,
    /// Maximum absolute column sum, `‖Γ‖₁`.
    pub one_norm: f64,
}

/// Moments of `V` computed from traces of powers of `Γ` (no eigensolve).
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TraceMoments {
    /// `E V = trace Γ`.
    pub mean_vn: f64,
    /// `trace(Γ²) = Σλ²`.
    pub trace_sq: f64,
    /// `trace(Γ⁴) = Σλ⁴`.
    pub trace_quad: f64,
    pub var_vn: f64,
    pub fourth_central: f64,
    /// `E(V−EV)⁴ / Var(V)² − 3`; zero when the variance vanishes.
    pub kurtosis_excess: f64,
}

impl TraceMoments {
    fn from_traces(mean_vn: f64, trace_sq: f64, trace_quad: f64) -> Self {
        let var_vn = 2.0 * trace_sq;
        let fourth_central = 12.0 * trace_sq * trace_sq + FOURTH_MOMENT_TRACE_COEFF * trace_quad;
        let kurtosis_excess = if var_vn > 0.0 { fourth_central / (var_vn * var_vn) - 3.0 } else { 0.0 };
        Self { mean_vn, trace_sq, trace_quad, var_vn, fourth_central, kurtosis_excess }
    }
}

/// Trace moments together with the spectrum of `Γ`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MomentReport {
    pub n: usize,
    pub mean_vn: f64,
    pub var_vn: f64,
    pub fourth_central: f64,
    pub kurtosis_excess: f64,
    pub trace_sq: f64,
    pub trace_quad: f64,
    /// Descending by absolute value.
    pub eigenvalues: Vec<f64>,
    /// `λ* = max |λ_k|`.
    pub lambda_star: f64,
}

impl MomentReport {
    pub fn traces(&self) -> TraceMoments {
        TraceMoments {
            mean_vn: self.mean_vn,
            trace_sq: self.trace_sq,
            trace_quad: self.trace_quad,
            var_vn: self.var_vn,
            fourth_central: self.fourth_central,
            kurtosis_excess: self.kurtosis_excess,
        }
    }
}

/// Eigenvalues of `Γ`, descending by absolute value.
pub fn eigenvalues(g: &CovMatrix) -> Result<Vec<f64>> {
    SymmetricEigen::eigenvalues(g.as_slice(), g.dim())
}

/// Maximum absolute column sum.
pub fn one_norm(g: &CovMatrix) -> f64 {
    let n = g.dim();
    let mut sums = vec![0.0f64; n];
    for i in 0..n {
        for (s, x) in sums.iter_mut().zip(g.row(i)) {
            *s += fabs(*x);
        }
    }
    sums.into_iter().fold(0.0, f64::max)
}

pub fn norms(g: &CovMatrix) -> Result<NormReport> {
    let ev = eigenvalues(g)?;
    Ok(norms_with_spectrum(g, &ev))
}

pub(crate) fn norms_with_spectrum(g: &CovMatrix, ev: &[f64]) -> NormReport {
    NormReport {
        trace: g.trace(),
        frobenius: sqrt(g.sum_of_squares()),
        spectral: ev.first().map_or(0.0, |x| fabs(*x)),
        one_norm: one_norm(g),
    }
}

/// `trace(Γ⁴) = ‖Γ²‖_F²`.
pub fn trace_fourth_power(g: &CovMatrix) -> f64 {
    let sq = matmul(g.as_slice(), g.as_slice(), g.dim());
    sq.iter().map(|x| x * x).sum()
}

/// Moments of `V` via `trace(Γ²)` and `trace(Γ⁴)` only; `O(n³)` through a
/// single matrix product, usable at dimensions where an eigensolve is slow.
pub fn trace_moments(g: &CovMatrix) -> Result<TraceMoments> {
    if g.dim() == 0 {
        return Err(usage!("moments of an empty vector are undefined"));
    }
    Ok(TraceMoments::from_traces(g.trace(), g.sum_of_squares(), trace_fourth_power(g)))
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    fabs(a - b) <= rel * fabs(a).max(fabs(b))
}

/// Full moment report. The eigenvalue sums `Σλ²`, `Σλ⁴` are checked against
/// the trace route to `1e-9` relative.
pub fn qv_moments(g: &CovMatrix) -> Result<MomentReport> {
    let t = trace_moments(g)?;
    let ev = eigenvalues(g)?;
    assemble(g.dim(), t, ev)
}

fn assemble(n: usize, t: TraceMoments, eigenvalues: Vec<f64>) -> Result<MomentReport> {
    let sum2: f64 = eigenvalues.iter().map(|x| x * x).sum();
    let sum4: f64 = eigenvalues.iter().map(|x| (x * x) * (x * x)).sum();
    if !close(sum2, t.trace_sq, 1e-9) || !close(sum4, t.trace_quad, 1e-9) {
        return Err(Error::Convergence(alloc::format!(
            "spectrum disagrees with traces: Σλ² = {sum2} vs {}, Σλ⁴ = {sum4} vs {}",
            t.trace_sq, t.trace_quad
        )));
    }
    let lambda_star = eigenvalues.first().map_or(0.0, |x| fabs(*x));
    Ok(MomentReport {
        n,
        mean_vn: t.mean_vn,
        var_vn: t.var_vn,
        fourth_central: t.fourth_central,
        kurtosis_excess: t.kurtosis_excess,
        trace_sq: t.trace_sq,
        trace_quad: t.trace_quad,
        eigenvalues,
        lambda_star,
    })
}

/// Norms and moments sharing one eigensolve.
pub fn norms_and_moments(g: &CovMatrix) -> Result<(NormReport, MomentReport)> {
    let t = trace_moments(g)?;
    let ev = eigenvalues(g)?;
    let norms = norms_with_spectrum(g, &ev);
    Ok((norms, assemble(g.dim(), t, ev)?))
}

/// `E (V − E V)^power` by expanding the product over index tuples and
/// evaluating every Gaussian product moment as a sum over Wick pairings.
///
/// Exponential cost; restricted to `n ≤ 8` and `power ∈ {2, 4}`.
pub fn isserlis_oracle(g: &CovMatrix, power: usize) -> Result<f64> {
    let n = g.dim();
    if n > ORACLE_MAX_DIM {
        return Err(Error::Capacity { n, max: ORACLE_MAX_DIM });
    }
    if power != 2 && power != 4 {
        return Err(usage!("oracle supports powers 2 and 4, got {power}"));
    }
    if n == 0 {
        return Err(usage!("moments of an empty vector are undefined"));
    }
    let mut total = 0.0;
    let mut tuple = vec![0usize; power];
    let mut vars = Vec::with_capacity(2 * power);
    loop {
        // Π_m (Y_{i_m}² − Γ_{i_m i_m}) expanded over the subset kept squared.
        for mask in 0u32..(1 << power) {
            let mut coeff = 1.0;
            vars.clear();
            for (m, &i) in tuple.iter().enumerate() {
                if mask & (1 << m) != 0 {
                    vars.push(i);
                    vars.push(i);
                } else {
                    coeff *= -g.get(i, i);
                }
            }
            if coeff != 0.0 {
                total += coeff * wick(g, &mut vars.clone());
            }
        }
        // Next index tuple in lexicographic order.
        let mut pos = power;
        loop {
            if pos == 0 {
                return Ok(total);
            }
            pos -= 1;
            tuple[pos] += 1;
            if tuple[pos] < n {
                break;
            }
            tuple[pos] = 0;
        }
    }
}

/// `E[Y_{v_0} ⋯ Y_{v_{2m−1}}]` as the sum over perfect matchings of the
/// products of pairwise covariances.
fn wick(g: &CovMatrix, vars: &mut [usize]) -> f64 {
    match vars.len() {
        0 => 1.0,
        1 => 0.0,
        len => {
            let first = vars[0];
            let mut acc = 0.0;
            for partner in 1..len {
                let cov = g.get(first, vars[partner]);
                if cov != 0.0 {
                    vars.swap(1, partner);
                    acc += cov * wick(g, &mut vars[2..]);
                    vars.swap(1, partner);
                }
            }
            acc
        }
    }
}
