//! Dense symmetric eigensolver and Cholesky factorization.
//!
//! The eigensolver is the classical Householder tridiagonalization followed
//! by implicit QL iteration with Wilkinson-style shifts. Storage is the
//! transpose of the textbook column layout so that every inner loop walks a
//! contiguous row; eigenvector `i` is row `i` of the result.

use alloc::vec;
use alloc::vec::Vec;
use libm::{fabs, hypot, sqrt};

use crate::error::{data, usage};
use crate::{Error, Result};

/// Eigen-decomposition `A = Qᵀ Λ Q` of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    /// Eigenvalues sorted descending by absolute value.
    pub values: Vec<f64>,
    /// Row-major, row `i` is the unit eigenvector of `values[i]`.
    pub vectors: Vec<f64>,
    pub n: usize,
}

impl SymmetricEigen {
    /// Full decomposition. `a` is row-major `n × n` and must be symmetric.
    pub fn new(a: &[f64], n: usize) -> Result<Self> {
        let (values, vectors) = decompose(a, n, true)?;
        Ok(Self { values, vectors, n })
    }

    /// Eigenvalues only, sorted descending by absolute value.
    pub fn eigenvalues(a: &[f64], n: usize) -> Result<Vec<f64>> {
        decompose(a, n, false).map(|(v, _)| v)
    }

    /// `Qᵀ Λ Q`, used by tests and by the factorization fallback.
    pub fn reconstruct(&self) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n * n];
        for (k, lambda) in self.values.iter().enumerate() {
            let q = &self.vectors[k * n..(k + 1) * n];
            for i in 0..n {
                let qi = lambda * q[i];
                let row = &mut out[i * n..(i + 1) * n];
                for (o, qj) in row.iter_mut().zip(q) {
                    *o += qi * qj;
                }
            }
        }
        out
    }
}

fn decompose(a: &[f64], n: usize, want_vectors: bool) -> Result<(Vec<f64>, Vec<f64>)> {
    if a.len() != n * n {
        return Err(usage!("matrix has {} entries, expected {}", a.len(), n * n));
    }
    if n == 0 {
        return Ok((Vec::new(), Vec::new()));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(data!("matrix has non-finite entries"));
    }
    let mut u = a.to_vec();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(&mut u, n, &mut d, &mut e, want_vectors);
    ql_implicit(&mut u, n, &mut d, &mut e, want_vectors)?;

    let mut order: Vec<usize> = (0..n).collect();
    // Stable sort keeps the result bit-deterministic for ties.
    order.sort_by(|&i, &j| fabs(d[j]).total_cmp(&fabs(d[i])));
    let values = order.iter().map(|&i| d[i]).collect();
    let vectors = if want_vectors {
        let mut v = Vec::with_capacity(n * n);
        for &i in &order {
            v.extend_from_slice(&u[i * n..(i + 1) * n]);
        }
        v
    } else {
        Vec::new()
    };
    Ok((values, vectors))
}

/// Householder reduction to tridiagonal form. `u` holds the transposed
/// working matrix; on return with `want_vectors`, row `j` of `u` is column
/// `j` of the accumulated orthogonal transformation.
fn tridiagonalize(u: &mut [f64], n: usize, d: &mut [f64], e: &mut [f64], want_vectors: bool) {
    for j in 0..n {
        d[j] = u[j * n + n - 1];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for dk in &d[..i] {
            scale += fabs(*dk);
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = u[j * n + i - 1];
                u[j * n + i] = 0.0;
                u[i * n + j] = 0.0;
            }
        } else {
            for dk in &mut d[..i] {
                *dk /= scale;
                h += *dk * *dk;
            }
            let mut f = d[i - 1];
            let mut g = sqrt(h);
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in &mut e[..i] {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                u[i * n + j] = f;
                let row = &u[j * n..j * n + i];
                g = e[j] + row[j] * f;
                for k in j + 1..i {
                    g += row[k] * d[k];
                    e[k] += row[k] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                let row = &mut u[j * n..j * n + i];
                for k in j..i {
                    row[k] -= f * e[k] + g * d[k];
                }
                d[j] = u[j * n + i - 1];
                u[j * n + i] = 0.0;
            }
        }
        d[i] = h;
    }

    if !want_vectors {
        for j in 0..n {
            d[j] = u[j * n + j];
        }
        e[0] = 0.0;
        return;
    }

    for i in 0..n - 1 {
        u[i * n + n - 1] = u[i * n + i];
        u[i * n + i] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = u[(i + 1) * n + k] / h;
            }
            for j in 0..=i {
                let (head, tail) = u.split_at_mut((i + 1) * n);
                let house = &tail[..=i];
                let row = &mut head[j * n..j * n + i + 1];
                let g: f64 = house.iter().zip(row.iter()).map(|(a, b)| a * b).sum();
                for (r, dk) in row.iter_mut().zip(&d[..=i]) {
                    *r -= g * dk;
                }
            }
        }
        for k in 0..=i {
            u[(i + 1) * n + k] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = u[j * n + n - 1];
        u[j * n + n - 1] = 0.0;
    }
    u[(n - 1) * n + n - 1] = 1.0;
    e[0] = 0.0;
}

/// Implicit QL on the tridiagonal `(d, e)`; rotations are applied to the
/// rows of `u` when vectors are wanted.
fn ql_implicit(u: &mut [f64], n: usize, d: &mut [f64], e: &mut [f64], want_vectors: bool) -> Result<()> {
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let mut f = 0.0;
    let mut tst1 = 0.0f64;
    let eps = f64::EPSILON;
    let max_iter = 60 * n.max(10);
    for l in 0..n {
        tst1 = tst1.max(fabs(d[l]) + fabs(e[l]));
        let mut m = l;
        while m < n - 1 && fabs(e[m]) > eps * tst1 {
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > max_iter {
                    return Err(Error::Convergence(alloc::format!(
                        "QL iteration stalled at index {l}"
                    )));
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = hypot(p, 1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in &mut d[l + 2..n] {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = hypot(p, e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if want_vectors {
                        let (head, tail) = u.split_at_mut((i + 1) * n);
                        let vi = &mut head[i * n..(i + 1) * n];
                        let vi1 = &mut tail[..n];
                        for (a, b) in vi.iter_mut().zip(vi1.iter_mut()) {
                            let hb = *b;
                            *b = s * *a + c * hb;
                            *a = c * *a - s * hb;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if fabs(e[l]) <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

/// Lower-triangular Cholesky factor `L` (row-major) with `A = L Lᵀ`.
///
/// Returns `None` when a pivot is not strictly positive.
pub(crate) fn cholesky(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let (done, row_i) = l.split_at_mut(i * n);
            let li = &row_i[..j];
            let lj = if j == i { li } else { &done[j * n..j * n + j] };
            let s = a[i * n + j] - dot(li, lj);
            if i == j {
                if !(s > 0.0) || !s.is_finite() {
                    return None;
                }
                row_i[j] = sqrt(s);
            } else {
                row_i[j] = s / done[j * n + j];
            }
        }
    }
    Some(l)
}

/// Dot product with four independent accumulators (vectorizes; fixed order).
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 4];
    let chunks = n / 4;
    for c in 0..chunks {
        let k = 4 * c;
        acc[0] += a[k] * b[k];
        acc[1] += a[k + 1] * b[k + 1];
        acc[2] += a[k + 2] * b[k + 2];
        acc[3] += a[k + 3] * b[k + 3];
    }
    let mut tail = 0.0;
    for k in 4 * chunks..n {
        tail += a[k] * b[k];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `C = A · B` for square row-major matrices.
pub(crate) fn matmul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut c = vec![0.0; n * n];
    if n == 0 {
        return c;
    }
    let stride = n as isize;
    // SAFETY: all three buffers hold n*n f64 in row-major order and the
    // strides describe exactly that layout.
    unsafe {
        matrixmultiply::dgemm(
            n, n, n, 1.0,
            a.as_ptr(), stride, 1,
            b.as_ptr(), stride, 1,
            0.0,
            c.as_mut_ptr(), stride, 1,
        );
    }
    c
}
