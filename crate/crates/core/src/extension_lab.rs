//! Explicit spline extensions from an interface into the parameter square.
//!
//! A trace `w` living on the edge `x̂ = 0` is split into frequency buckets by
//! a generalized eigendecomposition of the second-derivative Gram against the
//! mass Gram. Bucket `ℓ` is extended by a two-term truncated power profile in
//! `x̂` whose support shrinks like `2^{-ℓ}`, so oscillatory components decay
//! fast away from the edge.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{sym_generalized_eig, GeneralizedEigen};
use crate::splines::{eval_bspline_all, gauss_legendre, greville_and_quadrature, KnotVector};

/// Trace functions vanishing with their first derivative at both ends.
#[derive(Clone, Debug)]
pub struct TraceSpace {
    kv: KnotVector,
    /// Index of the first B-spline in the trace basis.
    offset: usize,
    mass: DMatrix<f64>,
    stiff: DMatrix<f64>,
    eig: GeneralizedEigen,
}

/// 1D Gram matrices `∫ φ_i^(d) φ_j^(d)` for `d = 0, 1, 2` on B-splines
/// `offset..offset + n`.
fn trace_grams(kv: &KnotVector, offset: usize, n: usize, order: usize) -> [DMatrix<f64>; 3] {
    let (gx, gw) = gauss_legendre(order);
    let mut g = [DMatrix::zeros(n, n), DMatrix::zeros(n, n), DMatrix::zeros(n, n)];
    for (a, b) in kv.spans() {
        for (&t, &wt) in gx.iter().zip(&gw) {
            let x = a + (b - a) * t;
            let w = (b - a) * wt;
            let v = eval_bspline_all(kv, x, 2);
            for ki in 0..v.count() {
                let i = v.first + ki;
                if i < offset || i >= offset + n {
                    continue;
                }
                for kj in 0..v.count() {
                    let j = v.first + kj;
                    if j < offset || j >= offset + n {
                        continue;
                    }
                    for (d, gd) in g.iter_mut().enumerate() {
                        gd[(i - offset, j - offset)] += w * v.values[d][ki] * v.values[d][kj];
                    }
                }
            }
        }
    }
    g
}

impl TraceSpace {
    pub fn new(kv: &KnotVector) -> Result<Self> {
        let n_all = kv.len();
        if n_all < 5 {
            return Err(Error::InvalidConfig(format!("trace space needs at least 5 B-splines, got {n_all}")));
        }
        let offset = 2;
        let n = n_all - 4;
        let [mass, _, stiff] = trace_grams(kv, offset, n, kv.degree() + 1);
        let eig = sym_generalized_eig(&stiff, &mass)?;
        Ok(Self { kv: kv.clone(), offset, mass, stiff, eig })
    }

    pub fn dim(&self) -> usize {
        self.mass.nrows()
    }

    pub fn knots(&self) -> &KnotVector {
        &self.kv
    }

    pub fn mass(&self) -> &DMatrix<f64> {
        &self.mass
    }

    /// Gram matrix of second derivatives.
    pub fn stiffness(&self) -> &DMatrix<f64> {
        &self.stiff
    }

    pub fn eigen(&self) -> &GeneralizedEigen {
        &self.eig
    }

    /// `λ_i` with `(φ_i'', φ_j'') = λ_i² δ_ij`, ascending.
    pub fn lambdas(&self) -> Vec<f64> {
        self.eig.lambda_sq.iter().map(|l| l.max(0.0).sqrt()).collect()
    }

    /// Gram matrices of derivative orders 0, 1, 2 under a quadrature of `order`
    /// points per knot span.
    pub fn grams(&self, order: usize) -> [DMatrix<f64>; 3] {
        trace_grams(&self.kv, self.offset, self.dim(), order)
    }

    /// `d`-th derivative of the trace with coefficients `w` at `y`.
    pub fn eval(&self, w: &[f64], y: f64, d: usize) -> f64 {
        let v = eval_bspline_all(&self.kv, y, d);
        (0..v.count())
            .filter_map(|k| {
                let i = v.first + k;
                (i >= self.offset && i < self.offset + w.len()).then(|| w[i - self.offset] * v.values[d][k])
            })
            .sum()
    }

    /// `(w, φ_i)_M` for every eigenvector.
    pub fn modal(&self, w: &[f64]) -> Vec<f64> {
        let mw = &self.mass * DMatrix::from_column_slice(w.len(), 1, w);
        (0..self.dim()).map(|i| self.eig.vectors.column(i).dot(&mw.column(0))).collect()
    }

    pub fn mass_norm_sq(&self, w: &[f64]) -> f64 {
        quad_form(&self.mass, w, w)
    }

    /// Squared `H²` seminorm of the trace.
    pub fn semi_sq(&self, w: &[f64]) -> f64 {
        quad_form(&self.stiff, w, w)
    }
}

fn quad_form(a: &DMatrix<f64>, x: &[f64], y: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..x.len() {
        for j in 0..y.len() {
            s += x[i] * a[(i, j)] * y[j];
        }
    }
    s
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Level {
    pub ell: usize,
    pub mu: f64,
    pub xi: f64,
    pub eta: f64,
}

/// Levels and the eigenvalue buckets assigned to them.
#[derive(Clone, Debug)]
pub struct BucketPlan {
    pub degree: usize,
    pub h_hat: f64,
    pub levels: Vec<Level>,
    /// `buckets[ℓ-1]` holds the eigen indices of level `ℓ`.
    pub buckets: Vec<Vec<usize>>,
}

impl BucketPlan {
    /// `perp` is the knot vector normal to the interface.
    pub fn new(perp: &KnotVector, lambdas: &[f64]) -> Result<Self> {
        let p = perp.degree();
        let h_hat = perp.h_max();
        let l_count = (1.0 / h_hat).log2().floor() as i64 - 1;
        if l_count < 1 {
            return Err(Error::InvalidConfig(format!("mesh size {h_hat} is coarser than 1/4")));
        }
        let l_count = l_count as usize;
        let breaks = perp.breakpoints();
        let below = |t: f64| breaks.iter().copied().filter(|&b| b <= t * (1.0 + 1e-14)).fold(0.0, f64::max);
        let levels: Vec<Level> = (1..=l_count)
            .map(|ell| {
                let s = 0.5f64.powi(ell as i32);
                Level { ell, mu: p as f64 * 2f64.powi(ell as i32), xi: below(s), eta: below(2.0 * s) }
            })
            .collect();
        let mut buckets = vec![Vec::new(); l_count];
        for (i, &lam) in lambdas.iter().enumerate() {
            // Threshold between levels ℓ and ℓ+1 is √(μ_ℓ μ_{ℓ+1}).
            let mut ell = 0;
            while ell + 1 < l_count && lam >= (levels[ell].mu * levels[ell + 1].mu).sqrt() {
                ell += 1;
            }
            buckets[ell].push(i);
        }
        Ok(Self { degree: p, h_hat, levels, buckets })
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// Checks `2^{-ℓ-1} < ξ_ℓ ≤ 2^{-ℓ} < η_ℓ ≤ 2^{-ℓ+1}` and `η_ℓ − ξ_ℓ ≥ 2^{-ℓ-1}`.
    pub fn spacing_holds(&self) -> bool {
        self.levels.iter().all(|l| {
            let s = 0.5f64.powi(l.ell as i32);
            0.5 * s < l.xi && l.xi <= s && s < l.eta && l.eta <= 2.0 * s && l.eta - l.xi >= 0.5 * s
        })
    }

    /// Whether the buckets partition `0..n`.
    pub fn is_partition(&self, n: usize) -> bool {
        let mut seen = vec![0u8; n];
        for &i in self.buckets.iter().flatten() {
            if i >= n {
                return false;
            }
            seen[i] += 1;
        }
        seen.iter().all(|&c| c == 1)
    }
}

/// `d`-th derivative of the profile `ψ_{α,ℓ}` at `x`, for `d ≤ 2`.
pub fn psi(alpha: u8, level: &Level, p: usize, x: f64, d: usize) -> f64 {
    let (xi, eta) = (level.xi, level.eta);
    let gap = eta - xi;
    let (c_xi, c_eta) = match alpha {
        0 => (-xi / gap, eta / gap),
        _ => (xi * eta / (p as f64 * gap), -xi * eta / (p as f64 * gap)),
    };
    let term = |t: f64| {
        if x >= t {
            return 0.0;
        }
        let base = 1.0 - x / t;
        let mut f = 1.0;
        for k in 0..d {
            f *= (p - k) as f64;
        }
        f * (-1.0 / t).powi(d as i32) * base.powi((p - d) as i32)
    };
    c_xi * term(xi) + c_eta * term(eta)
}

/// Max deviation of `ψ_{α,ℓ}` from its spline interpolant at Greville points
/// of `perp`, sampled at `samples` points.
pub fn profile_interpolation_error(alpha: u8, level: &Level, perp: &KnotVector, samples: usize) -> Result<f64> {
    let p = perp.degree();
    let greville = greville_and_quadrature(perp, p + 1).greville;
    let n = greville.len();
    let colloc = DMatrix::from_fn(n, n, |i, j| eval_bspline_all(perp, greville[i], 0).get(0, j));
    let rhs = DMatrix::from_fn(n, 1, |i, _| psi(alpha, level, p, greville[i], 0));
    let c = colloc
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::InvalidConfig("singular collocation matrix".into()))?;
    let mut err = 0.0f64;
    for s in 0..samples {
        let x = s as f64 / (samples - 1) as f64;
        let v = eval_bspline_all(perp, x, 0);
        let spline: f64 = (0..v.count()).map(|k| c[v.first + k] * v.values[0][k]).sum();
        err = err.max((spline - psi(alpha, level, p, x, 0)).abs());
    }
    Ok(err)
}

/// Splits `w` into bucket components with `w = Σ w_ℓ`.
pub fn decompose(space: &TraceSpace, plan: &BucketPlan, w: &[f64]) -> Vec<Vec<f64>> {
    let modal = space.modal(w);
    plan.buckets
        .iter()
        .map(|b| {
            let mut out = vec![0.0; w.len()];
            for &i in b {
                let col = space.eig.vectors.column(i);
                for (o, v) in out.iter_mut().zip(col.iter()) {
                    *o += modal[i] * v;
                }
            }
            out
        })
        .collect()
}

/// `Ê_α w` in separated form `Σ_ℓ ψ_{α,ℓ}(x̂) w_ℓ(ŷ)`.
pub struct Extension<'a> {
    pub alpha: u8,
    space: &'a TraceSpace,
    plan: &'a BucketPlan,
    components: Vec<Vec<f64>>,
}

impl<'a> Extension<'a> {
    pub fn new(space: &'a TraceSpace, plan: &'a BucketPlan, w: &[f64], alpha: u8) -> Self {
        Self { alpha, space, plan, components: decompose(space, plan, w) }
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.components
    }

    /// `[u, u_x, u_y, u_xx, u_xy, u_yy]` at `(x, y)`.
    pub fn eval(&self, x: f64, y: f64) -> [f64; 6] {
        let p = self.plan.degree;
        let mut out = [0.0; 6];
        for (lvl, c) in self.plan.levels.iter().zip(&self.components) {
            let a = [0, 1, 2].map(|d| psi(self.alpha, lvl, p, x, d));
            let b = [0, 1, 2].map(|d| self.space.eval(c, y, d));
            out[0] += a[0] * b[0];
            out[1] += a[1] * b[0];
            out[2] += a[0] * b[1];
            out[3] += a[2] * b[0];
            out[4] += a[1] * b[1];
            out[5] += a[0] * b[2];
        }
        out
    }

    /// Squared `H²` seminorm on the unit square with `order` Gauss points per
    /// knot span in each direction.
    pub fn h2_semi_sq(&self, order: usize) -> f64 {
        let p = self.plan.degree;
        let levels = &self.plan.levels;
        let nl = levels.len();
        let (gx, gw) = gauss_legendre(order);
        let mut a = [DMatrix::<f64>::zeros(nl, nl), DMatrix::zeros(nl, nl), DMatrix::zeros(nl, nl)];
        for (s0, s1) in self.space.kv.spans() {
            for (&t, &wt) in gx.iter().zip(&gw) {
                let x = s0 + (s1 - s0) * t;
                let w = (s1 - s0) * wt;
                for (d, ad) in a.iter_mut().enumerate() {
                    let v: Vec<f64> = levels.iter().map(|l| psi(self.alpha, l, p, x, d)).collect();
                    for i in 0..nl {
                        for j in 0..nl {
                            ad[(i, j)] += w * v[i] * v[j];
                        }
                    }
                }
            }
        }
        let g = self.space.grams(order);
        let b: Vec<DMatrix<f64>> = g
            .iter()
            .map(|gd| DMatrix::from_fn(nl, nl, |i, j| quad_form(gd, &self.components[i], &self.components[j])))
            .collect();
        let mut s = 0.0;
        for i in 0..nl {
            for j in 0..nl {
                s += a[2][(i, j)] * b[0][(i, j)] + 2.0 * a[1][(i, j)] * b[1][(i, j)] + a[0][(i, j)] * b[2][(i, j)];
            }
        }
        s
    }
}

/// Right-hand side of the extension bound for trace `w`.
pub fn bound_rhs(space: &TraceSpace, h_hat: f64, alpha: u8, w: &[f64]) -> f64 {
    let p = space.kv.degree() as f64;
    let e = 3.0 - 2.0 * alpha as f64;
    let cap = p / h_hat;
    let modal: f64 = space
        .lambdas()
        .iter()
        .zip(space.modal(w))
        .map(|(&l, c)| l.min(cap).powf(e) * c * c)
        .sum();
    modal + p.powf(e) * space.mass_norm_sq(w) + cap.powf(-1.0 - 2.0 * alpha as f64) * space.semi_sq(w)
}

/// Largest and smallest ratio `|Ê_α w|²_{H²} / rhs` over the samples of one case.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundRow {
    pub p: usize,
    pub r: u32,
    pub alpha: u8,
    pub max_ratio: f64,
    pub min_ratio: f64,
    pub samples: usize,
}

/// Random traces: plain coefficients, then modal weights damped by `λ_i^{-1}`
/// and `λ_i^{-2}` in turn.
fn sample_trace(space: &TraceSpace, rng: &mut ChaCha8Rng, kind: usize) -> Vec<f64> {
    let n = space.dim();
    if kind % 3 == 0 {
        return (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    }
    let lam = space.lambdas();
    let mut w = vec![0.0; n];
    for (i, &l) in lam.iter().enumerate() {
        let c = rng.gen_range(-1.0..1.0) * l.powi(-((kind % 3) as i32));
        for (wj, v) in w.iter_mut().zip(space.eig.vectors.column(i).iter()) {
            *wj += c * v;
        }
    }
    w
}

fn case_seed(seed: u64, p: usize, r: u32, alpha: u8) -> u64 {
    seed ^ ((p as u64) << 32) ^ ((r as u64) << 16) ^ alpha as u64
}

/// Sweeps degrees and refinements; one row per `(p, r)`.
pub fn verify_bound(alpha: u8, degrees: &[usize], refinements: &[u32], samples: usize, seed: u64) -> Result<Vec<BoundRow>> {
    let cases: Vec<(usize, u32)> = degrees.iter().flat_map(|&p| refinements.iter().map(move |&r| (p, r))).collect();
    cases
        .par_iter()
        .map(|&(p, r)| {
            let kv = KnotVector::uniform(p, r);
            let space = TraceSpace::new(&kv)?;
            let plan = BucketPlan::new(&kv, &space.lambdas())?;
            let mut rng = ChaCha8Rng::seed_from_u64(case_seed(seed, p, r, alpha));
            let mut max_ratio = 0.0f64;
            let mut min_ratio = f64::INFINITY;
            for s in 0..samples {
                let w = sample_trace(&space, &mut rng, s);
                let ext = Extension::new(&space, &plan, &w, alpha);
                let ratio = ext.h2_semi_sq(p + 2) / bound_rhs(&space, plan.h_hat, alpha, &w);
                max_ratio = max_ratio.max(ratio);
                min_ratio = min_ratio.min(ratio);
            }
            Ok(BoundRow { p, r, alpha, max_ratio, min_ratio, samples })
        })
        .collect()
}

/// Least-squares slope of `ln(max_ratio)` against `r`, per `(p, α)`; returns
/// the largest.
pub fn max_log_ratio_slope(rows: &[BoundRow]) -> f64 {
    let mut keys: Vec<(usize, u8)> = rows.iter().map(|b| (b.p, b.alpha)).collect();
    keys.sort_unstable();
    keys.dedup();
    keys.iter()
        .map(|&(p, a)| {
            let pts: Vec<(f64, f64)> =
                rows.iter().filter(|b| b.p == p && b.alpha == a).map(|b| (b.r as f64, b.max_ratio.ln())).collect();
            let n = pts.len() as f64;
            let mx = pts.iter().map(|q| q.0).sum::<f64>() / n;
            let my = pts.iter().map(|q| q.1).sum::<f64>() / n;
            let sxx: f64 = pts.iter().map(|q| (q.0 - mx).powi(2)).sum();
            let sxy: f64 = pts.iter().map(|q| (q.0 - mx) * (q.1 - my)).sum();
            if sxx > 0.0 {
                sxy / sxx
            } else {
                0.0
            }
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Worst trace identity residual of `Ê_α` on `points` points of every edge.
pub fn trace_identity_residual(space: &TraceSpace, plan: &BucketPlan, w: &[f64], alpha: u8, points: usize) -> f64 {
    let ext = Extension::new(space, plan, w, alpha);
    let mut worst = 0.0f64;
    for k in 0..points {
        let t = (k as f64 + 0.5) / points as f64;
        let at_gamma = ext.eval(0.0, t);
        let (w_val, w_dn) = match alpha {
            0 => (space.eval(w, t, 0), 0.0),
            _ => (0.0, space.eval(w, t, 0)),
        };
        worst = worst.max((at_gamma[0] - w_val).abs()).max((-at_gamma[1] - w_dn).abs());
        for v in [ext.eval(1.0, t), ext.eval(t, 0.0), ext.eval(t, 1.0)] {
            worst = worst.max(v[0].abs()).max(v[1].abs()).max(v[2].abs());
        }
    }
    worst
}

pub fn bound_csv(rows: &[BoundRow]) -> String {
    let mut s = String::from("p,r,alpha,max_ratio,min_ratio,samples\n");
    for b in rows {
        s.push_str(&format!("{},{},{},{:.6e},{:.6e},{}\n", b.p, b.r, b.alpha, b.max_ratio, b.min_ratio, b.samples));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(p: usize, r: u32) -> (TraceSpace, BucketPlan) {
        let kv = KnotVector::uniform(p, r);
        let s = TraceSpace::new(&kv).unwrap();
        let plan = BucketPlan::new(&kv, &s.lambdas()).unwrap();
        (s, plan)
    }

    #[test]
    fn eigenvectors_are_orthonormal() {
        let (s, _) = setup(3, 4);
        let v = &s.eig.vectors;
        let m = v.transpose() * s.mass() * v;
        let d = v.transpose() * s.stiffness() * v;
        let lam = s.lambdas();
        for i in 0..s.dim() {
            for j in 0..s.dim() {
                let dm = if i == j { 1.0 } else { 0.0 };
                assert!((m[(i, j)] - dm).abs() < 1e-9);
                assert!((d[(i, j)] - dm * lam[i] * lam[i]).abs() < 1e-9 * lam[s.dim() - 1].powi(2));
            }
        }
        assert!(lam[0] > 0.0);
    }

    #[test]
    fn plan_spacing_and_partition() {
        for p in 2..=5 {
            for r in 2..=7 {
                let (s, plan) = setup(p, r);
                assert_eq!(plan.depth(), r as usize - 1);
                assert!(plan.spacing_holds(), "p={p} r={r}");
                assert!(plan.is_partition(s.dim()));
            }
        }
    }

    #[test]
    fn profile_endpoint_values() {
        for p in 2..=4 {
            let (_, plan) = setup(p, 5);
            for lvl in &plan.levels {
                assert!((psi(0, lvl, p, 0.0, 0) - 1.0).abs() < 1e-14);
                assert!(psi(0, lvl, p, 0.0, 1).abs() < 1e-12);
                assert!(psi(1, lvl, p, 0.0, 0).abs() < 1e-14);
                assert!((psi(1, lvl, p, 0.0, 1) + 1.0).abs() < 1e-12);
                for x in [lvl.eta, 0.5 * (lvl.eta + 1.0), 1.0] {
                    for d in 0..=2 {
                        assert_eq!(psi(0, lvl, p, x, d), 0.0);
                        assert_eq!(psi(1, lvl, p, x, d), 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn profile_derivatives_match_differences() {
        let (_, plan) = setup(4, 4);
        let lvl = &plan.levels[1];
        let h = 1e-6;
        for alpha in [0, 1] {
            for x in [0.05, 0.2, 0.3] {
                let fd1 = (psi(alpha, lvl, 4, x + h, 0) - psi(alpha, lvl, 4, x - h, 0)) / (2.0 * h);
                let fd2 = (psi(alpha, lvl, 4, x + h, 1) - psi(alpha, lvl, 4, x - h, 1)) / (2.0 * h);
                assert!((fd1 - psi(alpha, lvl, 4, x, 1)).abs() < 1e-6);
                assert!((fd2 - psi(alpha, lvl, 4, x, 2)).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn profiles_are_splines() {
        for p in 2..=4 {
            let kv = KnotVector::uniform(p, 4);
            let (_, plan) = setup(p, 4);
            for lvl in &plan.levels {
                for alpha in [0, 1] {
                    assert!(profile_interpolation_error(alpha, lvl, &kv, 100).unwrap() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn decomposition_reconstructs() {
        let (s, plan) = setup(3, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let w: Vec<f64> = (0..s.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let parts = decompose(&s, &plan, &w);
            for (i, wi) in w.iter().enumerate() {
                let sum: f64 = parts.iter().map(|c| c[i]).sum();
                assert!((sum - wi).abs() < 1e-12);
            }
            for a in 0..parts.len() {
                for b in 0..a {
                    assert!(quad_form(s.mass(), &parts[a], &parts[b]).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn first_eigenvector_lands_in_one_bucket() {
        let (s, plan) = setup(2, 5);
        let parts = decompose(&s, &plan, &s.eig.vector(0));
        let nonzero = parts.iter().filter(|c| c.iter().any(|v| v.abs() > 1e-10)).count();
        assert_eq!(nonzero, 1);
        let home = plan.buckets.iter().position(|b| b.contains(&0)).unwrap();
        assert!(parts[home].iter().any(|v| v.abs() > 1e-10));
    }

    #[test]
    fn trace_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for p in 2..=4 {
            for r in 3..=5 {
                let (s, plan) = setup(p, r);
                let w: Vec<f64> = (0..s.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                for alpha in [0, 1] {
                    assert!(trace_identity_residual(&s, &plan, &w, alpha, 50) < 1e-10);
                }
            }
        }
    }

    #[test]
    fn zero_trace_gives_zero_extension() {
        let (s, plan) = setup(2, 4);
        let ext = Extension::new(&s, &plan, &vec![0.0; s.dim()], 0);
        assert_eq!(ext.eval(0.3, 0.4), [0.0; 6]);
        assert_eq!(ext.h2_semi_sq(4), 0.0);
    }

    #[test]
    fn seminorm_stable_under_quadrature() {
        let (s, plan) = setup(3, 4);
        let w: Vec<f64> = (0..s.dim()).map(|i| (i as f64 * 0.7).sin()).collect();
        for alpha in [0, 1] {
            let ext = Extension::new(&s, &plan, &w, alpha);
            let a = ext.h2_semi_sq(5);
            let b = ext.h2_semi_sq(9);
            assert!(a.is_finite() && a > 0.0);
            assert!((a - b).abs() <= 0.01 * b);
        }
    }

    #[test]
    fn derivative_extension_is_cheaper() {
        let (s, plan) = setup(3, 5);
        let w: Vec<f64> = (0..s.dim()).map(|i| (i as f64 * 1.3).cos()).collect();
        let r0 = Extension::new(&s, &plan, &w, 0).h2_semi_sq(5) / bound_rhs(&s, plan.h_hat, 0, &w);
        let r1 = Extension::new(&s, &plan, &w, 1).h2_semi_sq(5) / bound_rhs(&s, plan.h_hat, 1, &w);
        assert!(r1 <= r0 * 9.0);
    }

    #[test]
    fn sweep_is_bounded_and_flat() {
        for alpha in [0, 1] {
            let rows = verify_bound(alpha, &[2, 3], &[3, 4, 5], 10, 1).unwrap();
            assert!(rows.iter().all(|b| b.max_ratio <= 100.0 && b.min_ratio > 0.0));
            assert!(max_log_ratio_slope(&rows) <= 0.2);
        }
    }
}
