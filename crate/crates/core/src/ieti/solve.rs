//! Problem setup, the PCG driver and the conforming oracle.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::constraints::build_jump_and_primal;
use super::operators::{eliminate, IetiOperators};
use crate::assembly::{
    assemble_local, classify_dofs, AssemblyOptions, DofClass, DofTable, LocalSystem, Source,
};
use crate::error::{Error, Result};
use crate::geometry::MultiPatch;
use crate::linalg::{factorize, pcg, CgReport, PcgOptions, SparseSym};
use crate::splines::TensorBasis2D;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preconditioner {
    /// Scaled Dirichlet preconditioner.
    Scaled,
    /// Separate Schur complements on the value and derivative layers.
    Modified,
    None,
}

impl Preconditioner {
    pub fn as_str(self) -> &'static str {
        match self {
            Preconditioner::Scaled => "scaled",
            Preconditioner::Modified => "modified",
            Preconditioner::None => "none",
        }
    }
}

impl std::str::FromStr for Preconditioner {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scaled" => Ok(Preconditioner::Scaled),
            "modified" => Ok(Preconditioner::Modified),
            "none" => Ok(Preconditioner::None),
            _ => Err(Error::InvalidConfig(format!("unknown preconditioner '{s}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IetiOptions {
    pub precond: Preconditioner,
    pub pcg: PcgOptions,
    /// Factor in front of the scaled Dirichlet preconditioner.
    pub scaling: f64,
    pub assembly: AssemblyOptions,
}

impl Default for IetiOptions {
    fn default() -> Self {
        Self {
            precond: Preconditioner::Scaled,
            pcg: PcgOptions::default(),
            scaling: 0.25,
            assembly: AssemblyOptions::default(),
        }
    }
}

/// Bases, dof classification and local systems of one multi-patch problem.
pub struct Discretization {
    pub bases: Vec<TensorBasis2D>,
    pub dofs: DofTable,
    pub locals: Vec<LocalSystem>,
}

impl Discretization {
    /// Uniform refinement `r` of degree `p` on every patch.
    pub fn new(mp: &MultiPatch, p: usize, r: u32, source: Source<'_>, opts: &AssemblyOptions) -> Result<Self> {
        let tb = TensorBasis2D::uniform(p, r)?;
        tb.bx.knots().check_fine()?;
        Self::with_bases(mp, vec![tb; mp.num_patches()], source, opts)
    }

    pub fn with_bases(
        mp: &MultiPatch,
        bases: Vec<TensorBasis2D>,
        source: Source<'_>,
        opts: &AssemblyOptions,
    ) -> Result<Self> {
        let dofs = classify_dofs(mp, &bases)?;
        let locals = mp
            .patches
            .par_iter()
            .zip(&bases)
            .zip(&dofs.patches)
            .map(|((g, tb), d)| assemble_local(g, tb, source, d, opts))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { bases, dofs, locals })
    }

    /// Number of free dofs summed over patches.
    pub fn total_free(&self) -> usize {
        self.dofs.total_free()
    }

    /// Scatters free coefficients of patch `k` into its tensor numbering.
    pub fn tensor_coeffs(&self, k: usize, free: &[f64]) -> Vec<f64> {
        let d = &self.dofs.patches[k];
        let mut out = vec![0.0; d.class.len()];
        for (&t, &v) in d.free.iter().zip(free) {
            out[t] = v;
        }
        out
    }

    /// `Σ_k u_kᵀ A_k u_k`.
    pub fn energy(&self, u: &[Vec<f64>]) -> f64 {
        self.locals
            .iter()
            .zip(u)
            .map(|(s, uk)| s.a.mul_vec(uk).iter().zip(uk).map(|(a, b)| a * b).sum::<f64>())
            .sum()
    }

    pub fn operators(&self) -> Result<IetiOperators> {
        let (jump, primal) = build_jump_and_primal(&self.dofs)?;
        eliminate(&self.locals, &self.dofs, jump, primal)
    }
}

#[derive(Clone, Debug)]
pub struct Solution {
    /// Free coefficients per patch.
    pub coeffs: Vec<Vec<f64>>,
    pub lambda: Vec<f64>,
    pub report: CgReport,
    /// `‖Σ B u‖_∞ / ‖u‖_∞`.
    pub constraint_residual: f64,
    pub n_lambda: usize,
    pub n_primal: usize,
    pub timings: SolveTimings,
}

/// Wall-clock seconds spent in the solver phases.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveTimings {
    /// Local factorizations, the coarse problem and the preconditioner.
    pub setup: f64,
    /// PCG and recovery.
    pub solve: f64,
}

/// Runs PCG on the dual system and recovers the patch solutions. A run that
/// exhausts `max_iter` still returns its solution with `converged = false`.
pub fn solve_discretization(disc: &Discretization, opts: &IetiOptions) -> Result<Solution> {
    let t0 = Instant::now();
    let ops = disc.operators()?;
    let b = ops.rhs();
    let precond = match opts.precond {
        Preconditioner::Scaled => Some(ops.scaled_dirichlet(&disc.dofs, opts.scaling)?),
        Preconditioner::Modified => Some(ops.modified_dirichlet(&disc.dofs)?),
        Preconditioner::None => None,
    };
    let apply_m = |x: &[f64]| match &precond {
        Some(m) => m.apply(x),
        None => x.to_vec(),
    };
    let t1 = Instant::now();
    let (lambda, report) = pcg(|x| ops.apply_f(x), apply_m, &b, &opts.pcg)?;
    let (coeffs, _) = ops.recover(&lambda);
    let jump = ops.jump().apply(&coeffs);
    let u_max = coeffs.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let j_max = jump.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let constraint_residual = if u_max > 0.0 { j_max / u_max } else { j_max };
    Ok(Solution {
        coeffs,
        lambda,
        report,
        constraint_residual,
        n_lambda: ops.n_lambda(),
        n_primal: ops.n_primal(),
        timings: SolveTimings { setup: (t1 - t0).as_secs_f64(), solve: t1.elapsed().as_secs_f64() },
    })
}

pub fn solve(mp: &MultiPatch, p: usize, r: u32, source: Source<'_>, opts: &IetiOptions) -> Result<Solution> {
    let disc = Discretization::new(mp, p, r, source, &opts.assembly)?;
    let sol = solve_discretization(&disc, opts)?;
    if !sol.report.converged {
        return Err(Error::NotConverged { report: sol.report });
    }
    Ok(sol)
}

/// Global numbering of the conforming space: every free dof equals a factor
/// times one global unknown.
fn conforming_map(dofs: &DofTable) -> (usize, Vec<Vec<(usize, f64)>>) {
    let mut map: Vec<Vec<(usize, f64)>> =
        dofs.patches.iter().map(|p| vec![(usize::MAX, 0.0); p.n_free()]).collect();
    let mut next = dofs.n_primal;
    for (k, p) in dofs.patches.iter().enumerate() {
        for (&pos, &(g, s)) in p.primal.iter().zip(&p.primal_global) {
            map[k][pos] = (g, s);
        }
    }
    for m in &dofs.multipliers {
        let [(ka, ta, ca), (kb, tb, cb)] = m.entries;
        let pa = dofs.patches[ka].free_pos[ta];
        let pb = dofs.patches[kb].free_pos[tb];
        // ca·u_a + cb·u_b = 0 with u_a = v.
        map[ka][pa] = (next, 1.0);
        map[kb][pb] = (next, -ca / cb);
        next += 1;
    }
    for (k, p) in dofs.patches.iter().enumerate() {
        for &pos in &p.interior {
            debug_assert_eq!(p.class[p.free[pos]], DofClass::Interior);
            map[k][pos] = (next, 1.0);
            next += 1;
        }
    }
    (next, map)
}

/// Direct solve in the globally C¹ space; returns free coefficients per patch.
pub fn monolithic_solve(disc: &Discretization) -> Result<Vec<Vec<f64>>> {
    let (n, map) = conforming_map(&disc.dofs);
    let mut trip = Vec::new();
    let mut rhs = vec![0.0; n];
    for (sys, m) in disc.locals.iter().zip(&map) {
        for (i, &(gi, si)) in m.iter().enumerate() {
            rhs[gi] += si * sys.f[i];
            let (cols, vals) = sys.a.csr().row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let (gj, sj) = m[j];
                trip.push((gi, gj, si * sj * v));
            }
        }
    }
    let a = SparseSym::from_triplets(n, &trip)?;
    let x = factorize(&a)?.solve(&rhs);
    Ok(map.iter().map(|m| m.iter().map(|&(g, s)| s * x[g]).collect()).collect())
}
