//! Per-patch eliminations, the dual operator `F` and the Dirichlet-type
//! preconditioners.
//!
//! Patch contributions are computed in parallel and summed in patch order so
//! results do not depend on the thread count.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;

use super::constraints::{JumpMatrix, PrimalMap};
use crate::assembly::{DofTable, LocalSystem, PatchDofs};
use crate::error::{Error, Result};
use crate::linalg::{factorize, CsrMatrix, Factorization, LinalgError, SparseSym};

/// Sparse jump entries `(row, position, coefficient)` of one patch.
type JumpEntries = Vec<(usize, usize, f64)>;

fn jump_entries(b: &CsrMatrix, pos_of_free: &[usize]) -> JumpEntries {
    let mut out = Vec::new();
    for row in 0..b.nrows() {
        let (cols, vals) = b.row(row);
        for (&c, &v) in cols.iter().zip(vals) {
            let p = pos_of_free[c];
            debug_assert_ne!(p, usize::MAX, "jump entry outside the block");
            out.push((row, p, v));
        }
    }
    out
}

fn positions(set: &[usize], n_free: usize) -> Vec<usize> {
    let mut pos = vec![usize::MAX; n_free];
    for (i, &f) in set.iter().enumerate() {
        pos[f] = i;
    }
    pos
}

fn add_sparse(out: &mut [f64], parts: Vec<Vec<(usize, f64)>>) {
    for part in parts {
        for (i, v) in part {
            out[i] += v;
        }
    }
}

fn dense_cholesky(m: DMatrix<f64>) -> Result<Option<Cholesky<f64, Dyn>>> {
    if m.nrows() == 0 {
        return Ok(None);
    }
    let n = m.nrows();
    Cholesky::new(m)
        .map(Some)
        .ok_or(Error::Linalg(LinalgError::NotPositiveDefinite { row: n, pivot: f64::NAN }))
}

/// Elimination data of one patch.
pub(crate) struct PatchOperators {
    pub a: SparseSym,
    pub delta: Vec<usize>,
    pub primal: Vec<usize>,
    pub a_dd: Factorization,
    pub a_dp: CsrMatrix,
    /// Columns of `A_ΔΔ⁻¹ A_ΔΠ`.
    pub ext: Vec<Vec<f64>>,
    pub jump: JumpEntries,
    pub f_delta: Vec<f64>,
    pub f_primal: Vec<f64>,
}

/// The assembled dual-primal system.
pub struct IetiOperators {
    pub(crate) patches: Vec<PatchOperators>,
    pub(crate) jump: JumpMatrix,
    pub(crate) primal: PrimalMap,
    n_lambda: usize,
    n_primal: usize,
    s_pp: DMatrix<f64>,
    s_pp_chol: Option<Cholesky<f64, Dyn>>,
    b_pi: DMatrix<f64>,
    f_pi: Vec<f64>,
}

fn eliminate_patch(
    sys: &LocalSystem,
    dofs: &PatchDofs,
    b: &CsrMatrix,
) -> Result<PatchOperators> {
    let delta = dofs.delta();
    let primal = dofs.primal.clone();
    let a_dd = factorize(&sys.a.principal(&delta))?;
    let a_dp = sys.a.csr().submatrix(&delta, &primal);
    let a_pd = a_dp.transpose();
    let ext: Vec<Vec<f64>> = (0..primal.len())
        .map(|c| {
            let mut col = vec![0.0; delta.len()];
            let (rows, vals) = a_pd.row(c);
            for (&r, &v) in rows.iter().zip(vals) {
                col[r] = v;
            }
            a_dd.solve(&col)
        })
        .collect();
    let jump = jump_entries(b, &positions(&delta, dofs.n_free()));
    Ok(PatchOperators {
        f_delta: delta.iter().map(|&i| sys.f[i]).collect(),
        f_primal: primal.iter().map(|&i| sys.f[i]).collect(),
        a: sys.a.clone(),
        delta,
        primal,
        a_dd,
        a_dp,
        ext,
        jump,
    })
}

pub fn eliminate(
    locals: &[LocalSystem],
    dofs: &DofTable,
    jump: JumpMatrix,
    primal: PrimalMap,
) -> Result<IetiOperators> {
    let patches: Vec<PatchOperators> = locals
        .par_iter()
        .zip(&dofs.patches)
        .zip(&jump.patches)
        .map(|((sys, d), b)| eliminate_patch(sys, d, b))
        .collect::<Result<_>>()?;

    let n_lambda = jump.n_lambda;
    let n_primal = primal.n_primal;
    let mut s_pp = DMatrix::<f64>::zeros(n_primal, n_primal);
    let mut b_pi = DMatrix::zeros(n_lambda, n_primal);
    let mut f_pi = vec![0.0; n_primal];
    for (p, r) in patches.iter().zip(&primal.patches) {
        let np = p.primal.len();
        // Local primal Schur complement A_ΠΠ − A_ΠΔ A_ΔΔ⁻¹ A_ΔΠ.
        let a_pd = p.a_dp.transpose();
        let s_loc = DMatrix::from_fn(np, np, |i, j| {
            let (cols, vals) = a_pd.row(i);
            let coupling: f64 = cols.iter().zip(vals).map(|(&r, v)| v * p.ext[j][r]).sum();
            p.a.get(p.primal[i], p.primal[j]) - coupling
        });
        let sol = p.a_dd.solve(&p.f_delta);
        let f_loc: Vec<f64> = p.f_primal.iter().zip(a_pd.mul_vec(&sol)).map(|(f, c)| f - c).collect();
        // Rᵀ S R and Rᵀ f.
        for i in 0..np {
            let (gi, si) = single(r, i);
            f_pi[gi] += si * f_loc[i];
            for j in 0..np {
                let (gj, sj) = single(r, j);
                s_pp[(gi, gj)] += si * sj * s_loc[(i, j)];
            }
            // B_Π −= B_Δ ext_i R.
            for &(row, pos, c) in &p.jump {
                b_pi[(row, gi)] -= si * c * p.ext[i][pos];
            }
        }
    }
    let s_pp = (&s_pp + s_pp.transpose()) * 0.5;
    let s_pp_chol = dense_cholesky(s_pp.clone())?;
    Ok(IetiOperators { patches, jump, primal, n_lambda, n_primal, s_pp, s_pp_chol, b_pi, f_pi })
}

/// The single entry of row `i` of a signed selection matrix.
fn single(r: &CsrMatrix, i: usize) -> (usize, f64) {
    let (c, v) = r.row(i);
    (c[0], v[0])
}

impl IetiOperators {
    pub fn n_lambda(&self) -> usize {
        self.n_lambda
    }

    pub fn n_primal(&self) -> usize {
        self.n_primal
    }

    pub fn primal_schur(&self) -> &DMatrix<f64> {
        &self.s_pp
    }

    pub fn jump(&self) -> &JumpMatrix {
        &self.jump
    }

    pub fn primal_map(&self) -> &PrimalMap {
        &self.primal
    }

    fn coarse_solve(&self, y: Vec<f64>) -> Vec<f64> {
        match &self.s_pp_chol {
            Some(c) => c.solve(&DVector::from_vec(y)).as_slice().to_vec(),
            None => y,
        }
    }

    /// `Σ_k B_Δ A_ΔΔ⁻¹ g_k(λ)` where `g_k` is the patch right-hand side.
    fn sum_local_solves<G>(&self, rhs: G) -> Vec<f64>
    where
        G: Fn(&PatchOperators) -> Vec<f64> + Sync,
    {
        let parts: Vec<Vec<(usize, f64)>> = self
            .patches
            .par_iter()
            .map(|p| {
                let mut t = rhs(p);
                p.a_dd.solve_in_place(&mut t);
                p.jump.iter().map(|&(row, pos, c)| (row, c * t[pos])).collect()
            })
            .collect();
        let mut out = vec![0.0; self.n_lambda];
        add_sparse(&mut out, parts);
        out
    }

    fn bt_lambda(p: &PatchOperators, lambda: &[f64]) -> Vec<f64> {
        let mut t = vec![0.0; p.delta.len()];
        for &(row, pos, c) in &p.jump {
            t[pos] += c * lambda[row];
        }
        t
    }

    pub fn apply_f(&self, lambda: &[f64]) -> Vec<f64> {
        let mut out = self.sum_local_solves(|p| Self::bt_lambda(p, lambda));
        if self.n_primal > 0 {
            let y = self.b_pi.tr_mul(&DVector::from_column_slice(lambda)).as_slice().to_vec();
            let z = DVector::from_vec(self.coarse_solve(y));
            for (o, v) in out.iter_mut().zip((&self.b_pi * z).iter()) {
                *o += v;
            }
        }
        out
    }

    /// Right-hand side `Σ B_Δ A_ΔΔ⁻¹ f_Δ + B_Π S_ΠΠ⁻¹ f_Π`.
    pub fn rhs(&self) -> Vec<f64> {
        let mut out = self.sum_local_solves(|p| p.f_delta.clone());
        if self.n_primal > 0 {
            let z = DVector::from_vec(self.coarse_solve(self.f_pi.clone()));
            for (o, v) in out.iter_mut().zip((&self.b_pi * z).iter()) {
                *o += v;
            }
        }
        out
    }

    /// Recovers per-patch free coefficients from the multipliers.
    pub fn recover(&self, lambda: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>) {
        let w_pi = if self.n_primal > 0 {
            let bl = self.b_pi.tr_mul(&DVector::from_column_slice(lambda));
            let y: Vec<f64> = self.f_pi.iter().zip(bl.iter()).map(|(f, b)| f - b).collect();
            self.coarse_solve(y)
        } else {
            Vec::new()
        };
        let u = self
            .patches
            .par_iter()
            .zip(&self.primal.patches)
            .map(|(p, r)| {
                let bt = Self::bt_lambda(p, lambda);
                let mut w: Vec<f64> = p.f_delta.iter().zip(&bt).map(|(f, b)| f - b).collect();
                p.a_dd.solve_in_place(&mut w);
                let u_pi: Vec<f64> = if self.n_primal > 0 { r.mul_vec(&w_pi) } else { Vec::new() };
                for (c, &up) in u_pi.iter().enumerate() {
                    for (wi, e) in w.iter_mut().zip(&p.ext[c]) {
                        *wi -= e * up;
                    }
                }
                let mut u = vec![0.0; p.a.n()];
                for (&i, v) in p.delta.iter().zip(&w) {
                    u[i] = *v;
                }
                for (&i, v) in p.primal.iter().zip(&u_pi) {
                    u[i] = *v;
                }
                u
            })
            .collect();
        (u, w_pi)
    }

    /// Dense matrix of a linear operator on multiplier space, column by column.
    pub fn dense<A: Fn(&[f64]) -> Vec<f64> + Sync>(&self, apply: A) -> DMatrix<f64> {
        let n = self.n_lambda;
        let cols: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|j| {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                apply(&e)
            })
            .collect();
        DMatrix::from_fn(n, n, |i, j| cols[j][i])
    }

    /// Scaled Dirichlet preconditioner `scale · Σ B_Γ S_ΓΓ B_Γᵀ`.
    pub fn scaled_dirichlet(&self, dofs: &DofTable, scale: f64) -> Result<DirichletPreconditioner> {
        let blocks = self
            .patches
            .par_iter()
            .zip(&dofs.patches)
            .zip(&self.jump.patches)
            .map(|((p, d), b)| Ok(vec![SchurBlock::new(&p.a, &d.gamma(), &d.interior, b)?]))
            .collect::<Result<_>>()?;
        Ok(DirichletPreconditioner { blocks, scale, n_lambda: self.n_lambda })
    }

    /// Modified preconditioner built from the Schur complements onto the value
    /// layer and onto the derivative layer separately.
    pub fn modified_dirichlet(&self, dofs: &DofTable) -> Result<DirichletPreconditioner> {
        let union = |a: &[usize], b: &[usize]| {
            let mut v: Vec<usize> = a.iter().chain(b).copied().collect();
            v.sort_unstable();
            v
        };
        let blocks = self
            .patches
            .par_iter()
            .zip(&dofs.patches)
            .zip(&self.jump.patches)
            .map(|((p, d), b)| {
                Ok(vec![
                    SchurBlock::new(&p.a, &d.value, &union(&d.interior, &d.deriv), b)?,
                    SchurBlock::new(&p.a, &d.deriv, &union(&d.interior, &d.value), b)?,
                ])
            })
            .collect::<Result<_>>()?;
        Ok(DirichletPreconditioner { blocks, scale: 1.0, n_lambda: self.n_lambda })
    }
}

/// Schur complement of a patch matrix onto `keep`, eliminating `elim`.
pub(crate) struct SchurBlock {
    a_kk: CsrMatrix,
    a_ke: CsrMatrix,
    a_ek: CsrMatrix,
    a_ee: Factorization,
    jump: JumpEntries,
    n_keep: usize,
}

impl SchurBlock {
    fn new(a: &SparseSym, keep: &[usize], elim: &[usize], b: &CsrMatrix) -> Result<Self> {
        let csr = a.csr();
        let keep_pos = positions(keep, a.n());
        // Only the jump rows landing in `keep`.
        let mut jump = Vec::new();
        for row in 0..b.nrows() {
            let (cols, vals) = b.row(row);
            for (&c, &v) in cols.iter().zip(vals) {
                if keep_pos[c] != usize::MAX {
                    jump.push((row, keep_pos[c], v));
                }
            }
        }
        Ok(SchurBlock {
            a_kk: csr.submatrix(keep, keep),
            a_ke: csr.submatrix(keep, elim),
            a_ek: csr.submatrix(elim, keep),
            a_ee: factorize(&a.principal(elim))?,
            jump,
            n_keep: keep.len(),
        })
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.a_kk.mul_vec(x);
        if self.a_ee.n() > 0 {
            let mut t = self.a_ek.mul_vec(x);
            self.a_ee.solve_in_place(&mut t);
            for (yi, v) in y.iter_mut().zip(self.a_ke.mul_vec(&t)) {
                *yi -= v;
            }
        }
        y
    }
}

pub struct DirichletPreconditioner {
    blocks: Vec<Vec<SchurBlock>>,
    scale: f64,
    n_lambda: usize,
}

impl DirichletPreconditioner {
    pub fn apply(&self, lambda: &[f64]) -> Vec<f64> {
        let parts: Vec<Vec<(usize, f64)>> = self
            .blocks
            .par_iter()
            .map(|blocks| {
                let mut out = Vec::new();
                for s in blocks {
                    let mut x = vec![0.0; s.n_keep];
                    for &(row, pos, c) in &s.jump {
                        x[pos] += c * lambda[row];
                    }
                    let y = s.apply(&x);
                    out.extend(s.jump.iter().map(|&(row, pos, c)| (row, self.scale * c * y[pos])));
                }
                out
            })
            .collect();
        let mut out = vec![0.0; self.n_lambda];
        add_sparse(&mut out, parts);
        out
    }
}
