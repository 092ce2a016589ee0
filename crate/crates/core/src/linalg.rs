//! Small dense linear-algebra kernels.
//!
//! Everything here is pure Rust over [`ndarray`] with a [`Scalar`] element
//! type: a cyclic Jacobi eigensolver for symmetric matrices, Cholesky
//! factorization, and a partial-pivot solver for small systems. The sizes
//! that flow through (feature dimensions, latent ranks, per-class moments)
//! are modest, so O(n^3) with deterministic sweep order is the right trade.

use ndarray::{Array1, Array2};
use thiserror::Error;

use crate::num::{count, real, Scalar};

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is singular to working precision (pivot {pivot:e} at column {col})")]
    Singular { col: usize, pivot: f64 },
    #[error("matrix is not positive definite (leading minor {0})")]
    NotPositiveDefinite(usize),
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
}

/// Eigendecomposition of a symmetric matrix by the cyclic Jacobi method.
///
/// Returns `(values, vectors)` with eigenvalues sorted descending and
/// `vectors.column(i)` the unit eigenvector of `values[i]`. Only the given
/// matrix's lower triangle is trusted to mirror the upper one; asymmetry
/// beyond roundoff is the caller's bug.
pub fn sym_eig<R: Scalar>(a: &Array2<R>) -> Result<(Array1<R>, Array2<R>), LinalgError> {
    let n = check_square(a)?;
    let mut m = a.clone();
    let mut v = Array2::<R>::eye(n);
    if n <= 1 {
        return Ok((m.diag().to_owned(), v));
    }

    let eps = real::<R>(1e-14);
    for _sweep in 0..64 {
        let mut off = R::zero();
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[[p, q]] * m[[p, q]];
            }
        }
        let scale = m.iter().fold(R::zero(), |acc, &x| acc + x * x);
        if off <= eps * eps * scale.max(R::one()) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                if apq == R::zero() {
                    continue;
                }
                let app = m[[p, p]];
                let aqq = m[[q, q]];
                let theta = (aqq - app) / (real::<R>(2.0) * apq);
                // Stable rotation: t = sign(theta) / (|theta| + sqrt(theta^2 + 1)).
                let t = if theta >= R::zero() {
                    R::one() / (theta + (theta * theta + R::one()).sqrt())
                } else {
                    -R::one() / (-theta + (theta * theta + R::one()).sqrt())
                };
                let c = R::one() / (t * t + R::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        m[[j, j]]
            .partial_cmp(&m[[i, i]])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let values = Array1::from_iter(order.iter().map(|&i| m[[i, i]]));
    let mut vectors = Array2::<R>::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        for k in 0..n {
            vectors[[k, dst]] = v[[k, src]];
        }
    }
    Ok((values, vectors))
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
pub fn cholesky<R: Scalar>(a: &Array2<R>) -> Result<Array2<R>, LinalgError> {
    let n = check_square(a)?;
    let mut l = Array2::<R>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[[i, j]];
            for k in 0..j {
                sum -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if sum <= R::zero() {
                    return Err(LinalgError::NotPositiveDefinite(i));
                }
                l[[i, j]] = sum.sqrt();
            } else {
                l[[i, j]] = sum / l[[j, j]];
            }
        }
    }
    Ok(l)
}

/// Solves `L z = b` for lower-triangular `L` by forward substitution.
pub fn forward_solve<R: Scalar>(l: &Array2<R>, b: &[R]) -> Result<Vec<R>, LinalgError> {
    let n = check_square(l)?;
    if b.len() != n {
        return Err(LinalgError::DimensionMismatch { left: n, right: b.len() });
    }
    let mut z = vec![R::zero(); n];
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[[i, k]] * z[k];
        }
        z[i] = sum / l[[i, i]];
    }
    Ok(z)
}

/// Solves `A x = b` for each column of `b` by Gaussian elimination with
/// partial pivoting. Intended for the small systems that appear in the
/// latent-factor and ridge paths.
pub fn solve<R: Scalar>(a: &Array2<R>, b: &Array2<R>) -> Result<Array2<R>, LinalgError> {
    let n = check_square(a)?;
    if b.nrows() != n {
        return Err(LinalgError::DimensionMismatch { left: n, right: b.nrows() });
    }
    let m = b.ncols();
    let mut lu = a.clone();
    let mut x = b.clone();
    for col in 0..n {
        let mut pivot_row = col;
        let mut pivot_mag = lu[[col, col]].abs();
        for r in (col + 1)..n {
            let mag = lu[[r, col]].abs();
            if mag > pivot_mag {
                pivot_mag = mag;
                pivot_row = r;
            }
        }
        if pivot_mag == R::zero() {
            return Err(LinalgError::Singular { col, pivot: 0.0 });
        }
        if pivot_row != col {
            for k in 0..n {
                lu.swap([col, k], [pivot_row, k]);
            }
            for k in 0..m {
                x.swap([col, k], [pivot_row, k]);
            }
        }
        let pivot = lu[[col, col]];
        for r in (col + 1)..n {
            let factor = lu[[r, col]] / pivot;
            if factor == R::zero() {
                continue;
            }
            for k in col..n {
                let upd = lu[[col, k]] * factor;
                lu[[r, k]] -= upd;
            }
            for k in 0..m {
                let upd = x[[col, k]] * factor;
                x[[r, k]] -= upd;
            }
        }
    }
    for col in (0..n).rev() {
        for k in 0..m {
            let mut sum = x[[col, k]];
            for j in (col + 1)..n {
                sum -= lu[[col, j]] * x[[j, k]];
            }
            x[[col, k]] = sum / lu[[col, col]];
        }
    }
    Ok(x)
}

/// Population covariance (divisor `n`) of the rows of `x`, after centering
/// by the column means. Returns the `d x d` matrix and the mean row.
pub fn population_covariance<R: Scalar>(x: &Array2<R>) -> (Array2<R>, Array1<R>) {
    let n = x.nrows();
    let d = x.ncols();
    let inv_n = R::one() / count::<R>(n.max(1));
    let mut mean = Array1::<R>::zeros(d);
    for row in x.rows() {
        for (j, &v) in row.iter().enumerate() {
            mean[j] += v;
        }
    }
    mean.mapv_inplace(|v| v * inv_n);
    let mut cov = Array2::<R>::zeros((d, d));
    for row in x.rows() {
        for i in 0..d {
            let ci = row[i] - mean[i];
            for j in i..d {
                cov[[i, j]] += ci * (row[j] - mean[j]);
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            let v = cov[[i, j]] * inv_n;
            cov[[i, j]] = v;
            cov[[j, i]] = v;
        }
    }
    (cov, mean)
}

fn check_square<R: Scalar>(a: &Array2<R>) -> Result<usize, LinalgError> {
    if a.nrows() != a.ncols() {
        return Err(LinalgError::NotSquare { rows: a.nrows(), cols: a.ncols() });
    }
    Ok(a.nrows())
}
