//! Minimal sparse/dense linear algebra kernels.
//!
//! Everything the solver needs and nothing more: a row-compressed sparse
//! matrix (the algorithm is dominated by per-row inner products and
//! matvecs), a small dense symmetric solver, a profile (skyline) Cholesky
//! for assembled sparse SPD systems, and preconditioned CG. All scalars
//! are `f64`.

mod dense;
mod iterative;
mod profile;
mod sparse;

pub use dense::{chol_solve, DenseMatrix};
pub use iterative::{min_eig_estimate, op_norm_estimate, pcg_solve, IcPrecond, PcgResult};
pub use profile::ProfileChol;
pub use sparse::SparseMatrix;

use std::fmt;

/// Errors raised by linear-algebra kernels.
#[derive(Debug, Clone, PartialEq)]
pub enum LinalgError {
    /// Triplet or selection index outside the matrix dimensions.
    IndexOutOfRange {
        row: usize,
        col: usize,
        nrows: usize,
        ncols: usize,
    },
    /// A Cholesky pivot fell below the tolerance; the matrix is not
    /// (numerically) positive definite.
    NotPositiveDefinite { pivot: f64, index: usize },
}

impl fmt::Display for LinalgError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LinalgError::IndexOutOfRange {
                row,
                col,
                nrows,
                ncols,
            } => write!(
                f,
                "entry ({row}, {col}) out of range for a {nrows}x{ncols} matrix"
            ),
            LinalgError::NotPositiveDefinite { pivot, index } => write!(
                f,
                "matrix not positive definite: pivot {pivot:.3e} at index {index}"
            ),
        }
    }
}

impl std::error::Error for LinalgError {}

// ---- dense vector helpers -------------------------------------------------

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// y += alpha * x
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scale(alpha: f64, x: &mut [f64]) {
    for xi in x.iter_mut() {
        *xi *= alpha;
    }
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vector_helpers() {
        let a = [1.0, 2.0, -3.0];
        let b = [2.0, 0.5, 1.0];
        assert_eq!(dot(&a, &b), 0.0);
        assert_eq!(norm_inf(&a), 3.0);
        assert!((norm2(&[3.0, 4.0]) - 5.0).abs() < 1e-15);
        let mut y = vec![1.0, 1.0, 1.0];
        axpy(2.0, &a, &mut y);
        assert_eq!(y, vec![3.0, 5.0, -5.0]);
    }
}
