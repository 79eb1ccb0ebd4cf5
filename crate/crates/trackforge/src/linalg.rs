//! Minimal dense symmetric linear algebra: Cholesky factorization and a
//! cyclic Jacobi eigensolver. Matrices are row-major `Vec<F>` of size n*n.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Lower-triangular L with A = L * L^T. Fails when A is not positive
/// definite.
pub fn cholesky<F: Scalar>(a: &[F], n: usize) -> Result<Vec<F>> {
    assert_eq!(a.len(), n * n);
    let mut l = vec![F::zero(); n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i * n + j];
            for k in 0..j {
                sum = sum - l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= F::zero() {
                    return Err(Error::InvalidArgument(format!(
                        "matrix not positive definite at pivot {i}"
                    )));
                }
                l[i * n + j] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    Ok(l)
}

/// Solve A x = b given the Cholesky factor L of A.
pub fn cholesky_solve<F: Scalar>(l: &[F], n: usize, b: &[F]) -> Vec<F> {
    let mut y = vec![F::zero(); n];
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum = sum - l[i * n + k] * y[k];
        }
        y[i] = sum / l[i * n + i];
    }
    let mut x = vec![F::zero(); n];
    for i in (0..n).rev() {
        let mut sum = y[i];
        for k in i + 1..n {
            sum = sum - l[k * n + i] * x[k];
        }
        x[i] = sum / l[i * n + i];
    }
    x
}

/// ln det A from its Cholesky factor.
pub fn cholesky_logdet<F: Scalar>(l: &[F], n: usize) -> F {
    let mut acc = F::zero();
    for i in 0..n {
        acc += l[i * n + i].ln();
    }
    acc + acc
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns (eigenvalues, V) with A = V diag(values) V^T; column j of the
/// row-major V is the j-th eigenvector.
pub fn jacobi_eigen<F: Scalar>(a: &[F], n: usize) -> (Vec<F>, Vec<F>) {
    assert_eq!(a.len(), n * n);
    let mut m = a.to_vec();
    let mut v = vec![F::zero(); n * n];
    for i in 0..n {
        v[i * n + i] = F::one();
    }
    let tol = {
        let mut norm = F::zero();
        for x in &m {
            norm += *x * *x;
        }
        norm.sqrt() * F::epsilon() * F::from_f64_lossy(n as f64)
    };
    for _sweep in 0..100 {
        let mut off = F::zero();
        for p in 0..n {
            for q in p + 1..n {
                off += m[p * n + q] * m[p * n + q];
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq == F::zero() {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (F::from_f64_lossy(2.0) * apq);
                let t = {
                    let sign = if theta >= F::zero() { F::one() } else { -F::one() };
                    sign / (theta.abs() + (theta * theta + F::one()).sqrt())
                };
                let c = F::one() / (t * t + F::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let values = (0..n).map(|i| m[i * n + i]).collect();
    (values, v)
}

/// V diag(values) V^T.
pub fn reconstruct_from_eigen<F: Scalar>(values: &[F], v: &[F], n: usize) -> Vec<F> {
    let mut out = vec![F::zero(); n * n];
    for i in 0..n {
        for j in 0..n {
            let mut acc = F::zero();
            for k in 0..n {
                acc += v[i * n + k] * values[k] * v[j * n + k];
            }
            out[i * n + j] = acc;
        }
    }
    out
}
