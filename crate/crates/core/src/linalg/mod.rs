//! Sparse and dense linear algebra used by the solver.

mod cholesky;
mod dense;
mod pcg;
mod sparse;

pub use cholesky::{factorize, factorize_kind, rcm_ordering, Factorization, FactorKind};
pub use dense::{dense_kappa, sym_generalized_eig, GeneralizedEigen};
pub use pcg::{lanczos_kappa, pcg, CgReport, PcgOptions, ResidualNorm};
pub use sparse::{CsrMatrix, SparseSym, SYMMETRY_TOL};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("singular matrix: pivot {pivot:e} at row {row} below threshold {threshold:e}")]
    SingularMatrix { row: usize, pivot: f64, threshold: f64 },
    #[error("matrix is not positive definite: pivot {pivot:e} at row {row}")]
    NotPositiveDefinite { row: usize, pivot: f64 },
    #[error("mass matrix is not symmetric positive definite")]
    NotSpd,
    #[error("operator is not positive definite: curvature {curvature:e} at iteration {iteration}")]
    IndefiniteOperator { iteration: usize, curvature: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },
    #[error("entry ({row}, {col}) outside a {nrows}x{ncols} matrix")]
    IndexOutOfBounds { row: usize, col: usize, nrows: usize, ncols: usize },
    #[error("empty matrix")]
    Empty,
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += s * x`.
pub(crate) fn axpy(s: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += s * xi;
    }
}
