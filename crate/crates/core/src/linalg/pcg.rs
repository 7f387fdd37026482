//! Preconditioned conjugate gradients with a Lanczos estimate of the
//! condition number of the preconditioned operator.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{axpy, dot, norm2, LinalgError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualNorm {
    /// `‖b − F x‖ ≤ tol ‖b‖`.
    Unpreconditioned,
    /// `(rᵀ M r)^{1/2} ≤ tol (r₀ᵀ M r₀)^{1/2}`.
    Preconditioned,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PcgOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub residual_norm: ResidualNorm,
}

impl Default for PcgOptions {
    fn default() -> Self {
        Self { tol: 1e-6, max_iter: 500, residual_norm: ResidualNorm::Unpreconditioned }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CgReport {
    pub iterations: usize,
    /// ℓ² norms of the unpreconditioned residual, starting with `‖b‖`.
    pub residual_history: Vec<f64>,
    pub kappa_estimate: f64,
    pub converged: bool,
}

impl CgReport {
    /// Final residual relative to the first entry of the history.
    pub fn relative_residual(&self) -> f64 {
        match (self.residual_history.first(), self.residual_history.last()) {
            (Some(&r0), Some(&r)) if r0 > 0.0 => r / r0,
            _ => 0.0,
        }
    }
}

/// Solves `F x = b` starting from zero.
///
/// Returns `converged = false` once `max_iter` iterations have been spent.
pub fn pcg<F, M>(
    apply_f: F,
    apply_m: M,
    b: &[f64],
    opts: &PcgOptions,
) -> Result<(Vec<f64>, CgReport), LinalgError>
where
    F: Fn(&[f64]) -> Vec<f64>,
    M: Fn(&[f64]) -> Vec<f64>,
{
    let n = b.len();
    let mut x = vec![0.0; n];
    let b_norm = norm2(b);
    if b_norm == 0.0 {
        let report =
            CgReport { iterations: 0, residual_history: Vec::new(), kappa_estimate: 1.0, converged: true };
        return Ok((x, report));
    }

    let mut r = b.to_vec();
    let mut z = apply_m(&r);
    check_len(&z, n)?;
    let mut rz = dot(&r, &z);
    let rz0 = rz;
    let mut p = z.clone();
    let mut history = vec![b_norm];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut converged = false;

    for it in 0..opts.max_iter {
        let fp = apply_f(&p);
        check_len(&fp, n)?;
        let curvature = dot(&p, &fp);
        if !(curvature > 0.0) {
            return Err(LinalgError::IndefiniteOperator { iteration: it, curvature });
        }
        let alpha = rz / curvature;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &fp, &mut r);
        alphas.push(alpha);
        let r_norm = norm2(&r);

        z = apply_m(&r);
        let rz_new = dot(&r, &z);
        let done = match opts.residual_norm {
            ResidualNorm::Unpreconditioned => r_norm <= opts.tol * b_norm,
            ResidualNorm::Preconditioned => rz_new.max(0.0).sqrt() <= opts.tol * rz0.sqrt(),
        };
        if r_norm > 0.0 {
            history.push(r_norm);
        }
        if done || r_norm == 0.0 {
            converged = true;
            break;
        }
        let beta = rz_new / rz;
        betas.push(beta);
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }

    let iterations = alphas.len();
    let kappa_estimate = lanczos_kappa(&alphas, &betas);
    Ok((x, CgReport { iterations, residual_history: history, kappa_estimate, converged }))
}

fn check_len(v: &[f64], n: usize) -> Result<(), LinalgError> {
    if v.len() == n {
        Ok(())
    } else {
        Err(LinalgError::DimensionMismatch { expected: n, found: v.len() })
    }
}

/// Extreme eigenvalue ratio of the Lanczos matrix built from CG step lengths
/// `alphas` and direction updates `betas`.
pub fn lanczos_kappa(alphas: &[f64], betas: &[f64]) -> f64 {
    let k = alphas.len();
    if k == 0 {
        return 1.0;
    }
    let mut t = DMatrix::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = 1.0 / alphas[i];
        if i > 0 {
            t[(i, i)] += betas[i - 1] / alphas[i - 1];
        }
        if i + 1 < k {
            let off = betas[i].sqrt() / alphas[i];
            t[(i, i + 1)] = off;
            t[(i + 1, i)] = off;
        }
    }
    let eig = SymmetricEigen::new(t).eigenvalues;
    let max = eig.iter().cloned().fold(f64::MIN, f64::max);
    let min = eig.iter().cloned().fold(f64::MAX, f64::min);
    if min <= 0.0 {
        return f64::INFINITY;
    }
    (max / min).max(1.0)
}
