use alloc::vec::Vec;
use libm::fabs;

use crate::error::{data, usage};
use crate::Result;

/// Dense symmetric covariance matrix `Γ_jk = E[Y_j Y_k]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CovMatrix {
    n: usize,
    data: Vec<f64>,
}

impl CovMatrix {
    /// Checks symmetry to `1e-12` of the largest entry and a nonnegative
    /// diagonal, then symmetrizes exactly.
    pub fn new(n: usize, mut data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(usage!("matrix has {} entries, expected {}", data.len(), n * n));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(data!("covariance matrix has non-finite entries"));
        }
        let scale = data.iter().fold(0.0f64, |m, x| m.max(fabs(*x)));
        for i in 0..n {
            if data[i * n + i] < 0.0 {
                return Err(data!("negative variance {} at index {i}", data[i * n + i]));
            }
            for j in 0..i {
                let (a, b) = (data[i * n + j], data[j * n + i]);
                if fabs(a - b) > 1e-12 * scale {
                    return Err(data!("matrix not symmetric at ({i}, {j}): {a} vs {b}"));
                }
                let mean = 0.5 * (a + b);
                data[i * n + j] = mean;
                data[j * n + i] = mean;
            }
        }
        Ok(Self { n, data })
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&alloc::vec![1.0; n])
    }

    /// Panics on negative entries.
    pub fn diagonal(diag: &[f64]) -> Self {
        assert!(diag.iter().all(|d| *d >= 0.0), "diagonal must be nonnegative");
        let n = diag.len();
        let mut data = alloc::vec![0.0; n * n];
        for (i, d) in diag.iter().enumerate() {
            data[i * n + i] = *d;
        }
        Self { n, data }
    }

    /// Symmetric by construction: only the lower triangle is filled by `f`.
    pub(crate) fn from_lower(n: usize, mut f: impl FnMut(usize, usize) -> Result<f64>) -> Result<Self> {
        let mut data = alloc::vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let v = f(i, j)?;
                data[i * n + j] = v;
                data[j * n + i] = v;
            }
        }
        Self::new(n, data)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    /// `Σ_jk Γ_jk² = trace(Γ²)`.
    pub fn sum_of_squares(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { n: self.n, data: self.data.iter().map(|x| x * c).collect() }
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Error;
    use alloc::vec;

    #[test]
    fn rejects_asymmetry_and_negative_diagonal() {
        assert!(matches!(CovMatrix::new(2, vec![1.0, 0.5, 0.4, 1.0]), Err(Error::Data(_))));
        assert!(matches!(CovMatrix::new(1, vec![-1.0]), Err(Error::Data(_))));
        assert!(matches!(CovMatrix::new(2, vec![1.0]), Err(Error::Usage(_))));
        assert!(matches!(CovMatrix::new(1, vec![f64::NAN]), Err(Error::Data(_))));
    }

    #[test]
    fn basic_accessors() {
        let g = CovMatrix::new(2, vec![2.0, 1.0, 1.0, 3.0]).unwrap();
        assert_eq!(g.trace(), 5.0);
        assert_eq!(g.sum_of_squares(), 15.0);
        assert_eq!(g.row(1), &[1.0, 3.0]);
        assert_eq!(CovMatrix::identity(3).trace(), 3.0);
    }
}
