//! Small dense linear algebra: symmetric eigendecomposition and SPD solves.

use alloc::vec::Vec;

use crate::error::{invalid, shape_mismatch, Result};
use crate::math;
use crate::tensor::Matrix;

/// Eigenpairs of a symmetric matrix, sorted by decreasing eigenvalue.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    /// Column `k` is the unit eigenvector of `values[k]`.
    pub vectors: Matrix,
}

/// Cyclic Jacobi eigenvalue iteration.
pub fn symmetric_eigen(matrix: &Matrix) -> Result<SymmetricEigen> {
    let n = matrix.rows();
    if matrix.cols() != n {
        return Err(shape_mismatch("eigendecomposition needs a square matrix"));
    }
    let mut a = matrix.clone();
    let mut v = Matrix::identity(n);
    let scale: f64 = a.as_slice().iter().map(|x| x * x).sum::<f64>();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if off <= 1e-30 * scale || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = 1.0 / (math::abs(theta) + math::sqrt(theta * theta + 1.0));
                let t = if theta < 0.0 { -t } else { t };
                let c = 1.0 / math::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = Matrix::from_fn(n, n, |i, k| v[(i, order[k])]);
    Ok(SymmetricEigen { values, vectors })
}

/// Cholesky factor `L` (lower triangular) of a symmetric positive definite matrix.
pub fn cholesky(matrix: &Matrix) -> Result<Matrix> {
    cholesky_banded(matrix, matrix.rows().saturating_sub(1))
}

/// Half-bandwidth of a square matrix: the largest `|i − j|` with a nonzero entry.
pub fn bandwidth(matrix: &Matrix) -> usize {
    let n = matrix.rows();
    let mut bw = 0;
    for i in 0..n {
        for j in (i + 1 + bw)..n {
            if matrix[(i, j)] != 0.0 || matrix[(j, i)] != 0.0 {
                bw = j - i;
            }
        }
    }
    bw
}

/// Cholesky factorization exploiting a known half-bandwidth; `L` keeps it.
pub fn cholesky_banded(matrix: &Matrix, bw: usize) -> Result<Matrix> {
    let n = matrix.rows();
    if matrix.cols() != n {
        return Err(shape_mismatch("Cholesky needs a square matrix"));
    }
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let lo = j.saturating_sub(bw);
        let mut d = matrix[(j, j)];
        for k in lo..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) {
            return Err(invalid("matrix is not positive definite"));
        }
        let d = math::sqrt(d);
        l[(j, j)] = d;
        for i in (j + 1)..n.min(j + bw + 1) {
            let mut s = matrix[(i, j)];
            for k in i.saturating_sub(bw).max(lo)..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

/// Solves `L Lᵀ x = b` given the Cholesky factor.
pub fn cholesky_solve(l: &Matrix, b: &[f64]) -> Vec<f64> {
    cholesky_solve_banded(l, b, l.rows().saturating_sub(1))
}

pub fn cholesky_solve_banded(l: &Matrix, b: &[f64], bw: usize) -> Vec<f64> {
    let n = l.rows();
    let mut y = b.to_vec();
    for i in 0..n {
        for k in i.saturating_sub(bw)..i {
            y[i] -= l[(i, k)] * y[k];
        }
        y[i] /= l[(i, i)];
    }
    for i in (0..n).rev() {
        for k in (i + 1)..n.min(i + bw + 1) {
            y[i] -= l[(k, i)] * y[k];
        }
        y[i] /= l[(i, i)];
    }
    y
}
