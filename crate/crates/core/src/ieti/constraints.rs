//! Jump matrices `B^(k)` and primal maps `R^(k)`.

use crate::assembly::DofTable;
use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;

/// Signed jump operator split by patch; column `j` of `patches[k]` is free
/// dof `j` of patch `k`.
#[derive(Clone, Debug)]
pub struct JumpMatrix {
    pub n_lambda: usize,
    pub patches: Vec<CsrMatrix>,
}

/// `R^(k)` maps the global primal vector to the primal dofs of patch `k`,
/// listed in the order of `PatchDofs::primal`.
#[derive(Clone, Debug)]
pub struct PrimalMap {
    pub n_primal: usize,
    pub patches: Vec<CsrMatrix>,
    /// Selector `C^(k)`: free positions of the primal dofs.
    pub selectors: Vec<Vec<usize>>,
}

impl JumpMatrix {
    /// `Σ_k B^(k) u^(k)` for free-dof vectors.
    pub fn apply(&self, u: &[Vec<f64>]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_lambda];
        for (b, uk) in self.patches.iter().zip(u) {
            for (o, v) in out.iter_mut().zip(b.mul_vec(uk)) {
                *o += v;
            }
        }
        out
    }

    /// `Σ_k B^(k) B^(k)ᵀ` as a dense matrix.
    pub fn gram(&self) -> nalgebra::DMatrix<f64> {
        let n = self.n_lambda;
        let mut g = nalgebra::DMatrix::zeros(n, n);
        for b in &self.patches {
            let bt = b.transpose();
            for c in 0..bt.nrows() {
                let (rows, vals) = bt.row(c);
                for (&i, &vi) in rows.iter().zip(vals) {
                    for (&j, &vj) in rows.iter().zip(vals) {
                        g[(i, j)] += vi * vj;
                    }
                }
            }
        }
        g
    }

    /// Checks that every row couples exactly two dofs and every dof enters at
    /// most one row.
    pub fn check_pattern(&self) -> Result<()> {
        let mut per_row = vec![0usize; self.n_lambda];
        for (k, b) in self.patches.iter().enumerate() {
            let mut per_col = vec![0usize; b.ncols()];
            for i in 0..b.nrows() {
                let (cols, _) = b.row(i);
                per_row[i] += cols.len();
                for &c in cols {
                    per_col[c] += 1;
                }
            }
            if let Some(c) = per_col.iter().position(|&n| n > 1) {
                return Err(Error::Topology(format!("dof {c} of patch {k} enters several constraints")));
            }
        }
        match per_row.iter().position(|&n| n != 2) {
            Some(i) => Err(Error::Topology(format!("constraint {i} couples {} dofs", per_row[i]))),
            None => Ok(()),
        }
    }
}

pub fn build_jump_and_primal(dofs: &DofTable) -> Result<(JumpMatrix, PrimalMap)> {
    let n_lambda = dofs.n_lambda();
    let mut trip: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); dofs.patches.len()];
    for (row, m) in dofs.multipliers.iter().enumerate() {
        for &(k, t, c) in &m.entries {
            let pos = dofs.patches[k].free_pos[t];
            if pos == usize::MAX {
                return Err(Error::Topology(format!("constraint {row} touches eliminated dof {t} of patch {k}")));
            }
            trip[k].push((row, pos, c));
        }
    }
    let mut jump = Vec::with_capacity(trip.len());
    for (k, t) in trip.iter().enumerate() {
        jump.push(CsrMatrix::from_triplets(n_lambda, dofs.patches[k].n_free(), t)?);
    }
    let jump = JumpMatrix { n_lambda, patches: jump };
    jump.check_pattern()?;

    let mut rs = Vec::with_capacity(dofs.patches.len());
    let mut selectors = Vec::with_capacity(dofs.patches.len());
    for p in &dofs.patches {
        let t: Vec<(usize, usize, f64)> =
            p.primal_global.iter().enumerate().map(|(i, &(g, s))| (i, g, s)).collect();
        rs.push(CsrMatrix::from_triplets(p.primal.len(), dofs.n_primal, &t)?);
        selectors.push(p.primal.clone());
    }
    Ok((jump, PrimalMap { n_primal: dofs.n_primal, patches: rs, selectors }))
}
