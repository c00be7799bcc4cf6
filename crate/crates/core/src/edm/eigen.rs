//! Cyclic Jacobi eigen-solver for small dense symmetric matrices, plus an
//! eigenvalue-only tridiagonal QL path for hot loops.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 64;
const SYMMETRY_TOL: f64 = 1e-12;

/// Full eigendecomposition with eigenvalues in descending signed order.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    pub eigenvalues: DVector<f64>,
    /// Orthonormal eigenvectors, column `i` belongs to `eigenvalues[i]`.
    pub eigenvectors: DMatrix<f64>,
}

impl EigenDecomposition {
    /// `U Λ Uᵀ`
    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.eigenvectors
            * DMatrix::from_diagonal(&self.eigenvalues)
            * self.eigenvectors.transpose()
    }
}

fn check_symmetric(a: &DMatrix<f64>) -> Result<()> {
    if !a.is_square() {
        return Err(Error::Dimension(format!(
            "expected a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let n = a.nrows();
    let scale = a.amax().max(1.0);
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    if worst > SYMMETRY_TOL * scale {
        return Err(Error::NotSymmetric(worst));
    }
    Ok(())
}

pub fn symmetric_eigendecompose(a: &DMatrix<f64>) -> Result<EigenDecomposition> {
    check_symmetric(a)?;
    let n = a.nrows();
    // row-major working copies
    let mut work: Vec<f64> = (0..n * n).map(|k| a[(k / n, k % n)]).collect();
    let mut vecs = vec![0.0; n * n];
    for i in 0..n {
        vecs[i * n + i] = 1.0;
    }
    jacobi_in_place(&mut work, n, Some(&mut vecs))?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| work[j * n + j].total_cmp(&work[i * n + i]));
    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| work[i * n + i]));
    let eigenvectors = DMatrix::from_fn(n, n, |row, col| vecs[row * n + order[col]]);
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// Eigenvalues only, descending signed order.
pub fn symmetric_eigenvalues(a: &DMatrix<f64>) -> Result<Vec<f64>> {
    check_symmetric(a)?;
    let n = a.nrows();
    let mut work: Vec<f64> = (0..n * n).map(|k| a[(k / n, k % n)]).collect();
    jacobi_in_place(&mut work, n, None)?;
    let mut vals: Vec<f64> = (0..n).map(|i| work[i * n + i]).collect();
    vals.sort_by(|a, b| b.total_cmp(a));
    Ok(vals)
}

/// Diagonalises the row-major symmetric `a` in place, accumulating the
/// rotations into `v` when given. Eigenvalues end up on the diagonal,
/// unsorted.
pub(crate) fn jacobi_in_place(a: &mut [f64], n: usize, mut v: Option<&mut [f64]>) -> Result<()> {
    debug_assert_eq!(a.len(), n * n);
    if n < 2 {
        return Ok(());
    }
    let total: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    if total == 0.0 {
        return Ok(());
    }
    let target = 4.0 * n as f64 * f64::EPSILON * total;
    let negligible = 0.1 * f64::EPSILON * total;
    for _sweep in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[p * n + q] * a[p * n + q];
            }
        }
        if (2.0 * off).sqrt() <= target {
            return Ok(());
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                if apq.abs() < negligible {
                    a[p * n + q] = 0.0;
                    a[q * n + p] = 0.0;
                    continue;
                }
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // A ← A J
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                // A ← Jᵀ A
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                if let Some(v) = v.as_deref_mut() {
                    for k in 0..n {
                        let vkp = v[k * n + p];
                        let vkq = v[k * n + q];
                        v[k * n + p] = c * vkp - s * vkq;
                        v[k * n + q] = s * vkp + c * vkq;
                    }
                }
            }
        }
    }
    Err(Error::NoConvergence(MAX_SWEEPS))
}

const MAX_QL_ITERATIONS: usize = 60;

/// Eigenvalues (unsorted) of the row-major symmetric `n×n` matrix `a`, by
/// Householder reduction to tridiagonal form and implicit QL. Destroys `a`;
/// `d` and `e` need length `n`. Cheaper than Jacobi when no vectors are needed.
pub(crate) fn tridiagonal_eigenvalues(
    a: &mut [f64],
    n: usize,
    d: &mut [f64],
    e: &mut [f64],
) -> Result<()> {
    debug_assert!(a.len() == n * n && d.len() >= n && e.len() >= n);
    if n == 0 {
        return Ok(());
    }
    let mut v = [0.0f64; 16];
    let mut p = [0.0f64; 16];
    let mut vbuf;
    let mut pbuf;
    let (v, p): (&mut [f64], &mut [f64]) = if n <= 16 {
        (&mut v[..n], &mut p[..n])
    } else {
        vbuf = vec![0.0; n];
        pbuf = vec![0.0; n];
        (&mut vbuf[..], &mut pbuf[..])
    };
    for k in 0..n.saturating_sub(2) {
        d[k] = a[k * n + k];
        let norm = ((k + 1)..n)
            .map(|i| a[i * n + k] * a[i * n + k])
            .sum::<f64>()
            .sqrt();
        if norm == 0.0 {
            e[k] = 0.0;
            continue;
        }
        let x0 = a[(k + 1) * n + k];
        let alpha = if x0 > 0.0 { -norm } else { norm };
        e[k] = alpha;
        for i in (k + 1)..n {
            v[i] = a[i * n + k];
        }
        v[k + 1] -= alpha;
        let vn = ((k + 1)..n).map(|i| v[i] * v[i]).sum::<f64>().sqrt();
        for i in (k + 1)..n {
            v[i] /= vn;
        }
        // S ← H S H with H = I − 2vvᵀ on the trailing block
        let mut kk = 0.0;
        for i in (k + 1)..n {
            p[i] = ((k + 1)..n).map(|j| a[i * n + j] * v[j]).sum();
            kk += v[i] * p[i];
        }
        for i in (k + 1)..n {
            p[i] -= kk * v[i];
        }
        for i in (k + 1)..n {
            for j in (k + 1)..n {
                a[i * n + j] -= 2.0 * (v[i] * p[j] + p[i] * v[j]);
            }
        }
    }
    if n >= 2 {
        d[n - 2] = a[(n - 2) * n + n - 2];
        e[n - 2] = a[(n - 1) * n + n - 2];
    }
    d[n - 1] = a[(n - 1) * n + n - 1];
    e[n - 1] = 0.0;

    // implicit QL with Wilkinson-type shifts; e[i] couples d[i] and d[i+1]
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > MAX_QL_ITERATIONS {
                return Err(Error::NoConvergence(MAX_QL_ITERATIONS));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = (g * g + 1.0).sqrt();
            g = d[m] - d[l] + e[l] / (g + if g >= 0.0 { r } else { -r });
            let (mut s, mut c, mut pp) = (1.0, 1.0, 0.0);
            let mut underflow = false;
            for i in (l..m).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = (f * f + g * g).sqrt();
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= pp;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - pp;
                r = (d[i] - g) * s + 2.0 * c * b;
                pp = s * r;
                d[i + 1] = g + pp;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= pp;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}
