//! Dense symmetric generalized eigenproblems.

use nalgebra::{DMatrix, SymmetricEigen};

use super::LinalgError;

/// Eigenpairs of `D φ = λ² M φ`, ascending, with `M`-orthonormal vectors.
#[derive(Clone, Debug)]
pub struct GeneralizedEigen {
    pub lambda_sq: Vec<f64>,
    /// Eigenvectors stored as columns.
    pub vectors: DMatrix<f64>,
}

impl GeneralizedEigen {
    pub fn len(&self) -> usize {
        self.lambda_sq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda_sq.is_empty()
    }

    pub fn vector(&self, i: usize) -> Vec<f64> {
        self.vectors.column(i).iter().copied().collect()
    }
}

pub fn sym_generalized_eig(d: &DMatrix<f64>, mass: &DMatrix<f64>) -> Result<GeneralizedEigen, LinalgError> {
    let n = d.nrows();
    if d.ncols() != n {
        return Err(LinalgError::DimensionMismatch { expected: n, found: d.ncols() });
    }
    if mass.nrows() != n || mass.ncols() != n {
        return Err(LinalgError::DimensionMismatch { expected: n, found: mass.nrows() });
    }
    let chol = mass.clone().cholesky().ok_or(LinalgError::NotSpd)?;
    let l = chol.l();
    // C = L⁻¹ D L⁻ᵀ
    let y = l.solve_lower_triangular(d).ok_or(LinalgError::NotSpd)?;
    let c = l.solve_lower_triangular(&y.transpose()).ok_or(LinalgError::NotSpd)?;
    let c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(c);
    let q = l.transpose().solve_upper_triangular(&eig.eigenvectors).ok_or(LinalgError::NotSpd)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let lambda_sq = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| q[(r, order[c])]);
    Ok(GeneralizedEigen { lambda_sq, vectors })
}

/// Ratio of extreme eigenvalues of `M A` for symmetric positive definite
/// `M` and `A`, computed from the pencil `(A, M⁻¹)`.
pub fn dense_kappa(a: &DMatrix<f64>, m: &DMatrix<f64>) -> Result<f64, LinalgError> {
    let m_inv = m.clone().cholesky().ok_or(LinalgError::NotSpd)?.inverse();
    let eig = sym_generalized_eig(a, &m_inv)?;
    let min = eig.lambda_sq.first().copied().ok_or(LinalgError::Empty)?;
    let max = *eig.lambda_sq.last().unwrap();
    Ok(max / min)
}
