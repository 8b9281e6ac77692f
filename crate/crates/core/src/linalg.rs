//! Dense matrix kernels used by the solver.
//!
//! Matrices are `nalgebra::DMatrix<f64>`, stored column-major. Columns are
//! samples throughout the crate, so column access is the cheap direction.

use log::warn;
use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub type DenseMatrix = DMatrix<f64>;

/// Relative cutoff below which singular values count as zero.
pub const RANK_TOLERANCE: f64 = 1e-12;

const SVD_MAX_ITER: usize = 10_000;
const EIGEN_MAX_ITER: usize = 10_000;

pub fn ensure_finite(m: &DenseMatrix, what: &str) -> Result<()> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(Error::Validation(format!("{what} is empty")));
    }
    if let Some(idx) = m.iter().position(|x| !x.is_finite()) {
        let (row, col) = (idx % m.nrows(), idx / m.nrows());
        return Err(Error::Validation(format!(
            "{what} has a non-finite entry at ({row}, {col})"
        )));
    }
    Ok(())
}

/// `sign(x) * max(|x| - eps, 0)`.
pub fn soft_threshold(x: f64, eps: f64) -> Result<f64> {
    if !(eps >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "soft-threshold level must be nonnegative, got {eps}"
        )));
    }
    Ok(shrink(x, eps))
}

#[inline]
fn shrink(x: f64, eps: f64) -> f64 {
    if x - eps > 0.0 {
        x - eps
    } else if x + eps < 0.0 {
        x + eps
    } else {
        0.0
    }
}

/// Thin SVD `(U, sigma, Vt)`.
pub fn thin_svd(m: &DenseMatrix) -> Result<(DenseMatrix, DVector<f64>, DenseMatrix)> {
    let svd = m
        .clone()
        .try_svd(true, true, f64::EPSILON, SVD_MAX_ITER)
        .ok_or_else(|| {
            Error::numerical(
                "svd",
                format!(
                    "no convergence within {SVD_MAX_ITER} iterations on a {}x{} matrix",
                    m.nrows(),
                    m.ncols()
                ),
            )
        })?;
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    Ok((u, svd.singular_values, v_t))
}

pub fn singular_values(m: &DenseMatrix) -> Result<DVector<f64>> {
    m.clone()
        .try_svd(false, false, f64::EPSILON, SVD_MAX_ITER)
        .map(|svd| svd.singular_values)
        .ok_or_else(|| {
            Error::numerical(
                "svd",
                format!("no convergence within {SVD_MAX_ITER} iterations"),
            )
        })
}

/// Singular value thresholding: the proximal operator of `tau * ||.||_*`.
pub fn svt(m: &DenseMatrix, tau: f64) -> Result<DenseMatrix> {
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "svt threshold must be positive, got {tau}"
        )));
    }
    let (u, sigma, v_t) = thin_svd(m)?;
    let cutoff = RANK_TOLERANCE * sigma.max();
    let shrunk = sigma.map(|s| {
        let t = shrink(s, tau);
        if t < cutoff {
            0.0
        } else {
            t
        }
    });
    // U * diag(shrunk) * Vt, skipping zeroed directions.
    let mut out = DenseMatrix::zeros(m.nrows(), m.ncols());
    for (i, &s) in shrunk.iter().enumerate() {
        if s > 0.0 {
            out.ger(s, &u.column(i), &v_t.row(i).transpose(), 1.0);
        }
    }
    Ok(out)
}

/// Column-wise shrinkage: the proximal operator of `kappa * ||.||_{2,1}`.
pub fn prox_l21(t: &DenseMatrix, kappa: f64) -> Result<DenseMatrix> {
    if !(kappa > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "l2,1 shrinkage level must be positive, got {kappa}"
        )));
    }
    let mut out = t.clone();
    for mut col in out.column_iter_mut() {
        let norm = col.norm();
        if norm > kappa {
            col *= (norm - kappa) / norm;
        } else {
            col.fill(0.0);
        }
    }
    Ok(out)
}

pub fn nuclear_norm(m: &DenseMatrix) -> Result<f64> {
    Ok(singular_values(m)?.sum())
}

/// Sum of column Euclidean norms.
pub fn l21_norm(m: &DenseMatrix) -> f64 {
    m.column_iter().map(|c| c.norm()).sum()
}

/// Largest absolute entry.
pub fn max_abs(m: &DenseMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Solves `A X = B` for symmetric positive definite `A` via Cholesky.
///
/// When the factorization fails the solve is retried once with diagonal
/// jitter `1e-10 * trace(A) / n`.
pub fn solve_spd(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::InvalidArgument(format!(
            "solve_spd needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if b.nrows() != n {
        return Err(Error::InvalidArgument(format!(
            "right-hand side has {} rows, expected {n}",
            b.nrows()
        )));
    }
    let scale = max_abs(a).max(f64::MIN_POSITIVE);
    for i in 0..n {
        for j in (i + 1)..n {
            if (a[(i, j)] - a[(j, i)]).abs() > 1e-8 * scale {
                return Err(Error::InvalidArgument(format!(
                    "matrix is not symmetric at ({i}, {j})"
                )));
            }
        }
    }

    if let Some(chol) = Cholesky::new(a.clone()) {
        return Ok(chol.solve(b));
    }
    let jitter = 1e-10 * a.trace() / n as f64;
    warn!("cholesky failed; retrying with diagonal jitter {jitter:e}");
    let mut shifted = a.clone();
    for i in 0..n {
        shifted[(i, i)] += jitter;
    }
    Cholesky::new(shifted)
        .map(|chol| chol.solve(b))
        .ok_or_else(|| {
            Error::numerical(
                "cholesky",
                format!("{n}x{n} matrix is not positive definite even after jitter {jitter:e}"),
            )
        })
}

/// Eigendecomposition of a symmetric matrix, eigenvalues ascending.
///
/// Each eigenvector is sign-normalized so its largest-magnitude entry is
/// positive, which makes the output a deterministic function of the input.
pub fn symmetric_eigen(a: &DenseMatrix) -> Result<(DVector<f64>, DenseMatrix)> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::InvalidArgument(format!(
            "symmetric_eigen needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let eig =
        SymmetricEigen::try_new(a.clone(), f64::EPSILON, EIGEN_MAX_ITER).ok_or_else(|| {
            Error::numerical(
                "symmetric eigendecomposition",
                format!("no convergence within {EIGEN_MAX_ITER} iterations on a {n}x{n} matrix"),
            )
        })?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[i]
            .total_cmp(&eig.eigenvalues[j])
            .then(i.cmp(&j))
    });

    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DenseMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(src);
        let pivot = col.iter().fold(
            0.0_f64,
            |best, &x| if x.abs() > best.abs() { x } else { best },
        );
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        vectors.set_column(dst, &(col * sign));
    }
    Ok((values, vectors))
}

/// `(A + A^T) / 2`.
pub fn symmetrize(a: &DenseMatrix) -> DenseMatrix {
    (a + a.transpose()) * 0.5
}
