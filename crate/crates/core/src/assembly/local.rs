//! Patch-local Galerkin assembly of `∫ ∇²u : ∇²v` and `∫ f v`.

use super::dofs::PatchDofs;
use crate::error::Result;
use crate::geometry::{eval_map, GeometryMap, MapEval, Point};
use crate::linalg::{CsrMatrix, SparseSym};
use crate::splines::{eval_transformed_all, gauss_legendre, BasisValues, TensorBasis2D};

/// Scalar source term in physical coordinates.
pub type Source<'a> = &'a (dyn Fn(Point) -> f64 + Sync);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AssemblyOptions {
    /// Gauss points per element and direction; `None` means `p + 1`.
    pub quad_order: Option<usize>,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        Self { quad_order: None }
    }
}

/// Stiffness matrix and load vector on the free dofs of one patch.
#[derive(Clone, Debug)]
pub struct LocalSystem {
    pub a: SparseSym,
    pub f: Vec<f64>,
    /// Tensor index of each row.
    pub free: Vec<usize>,
}

/// Quadrature point on a patch with the geometry evaluated.
pub(crate) struct QuadPoint {
    pub x: f64,
    pub y: f64,
    pub weight: f64,
    pub map: MapEval,
    pub inv: [[f64; 2]; 2],
}

/// Sorted union of the discretization and geometry breakpoints.
fn merged_breaks(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = a.iter().chain(b).copied().collect();
    v.sort_by(f64::total_cmp);
    v.dedup_by(|x, y| (*x - *y).abs() < 1e-14);
    v
}

/// Quadrature cells `[x0, x1] × [y0, y1]` covering the patch.
pub(crate) fn cells(g: &GeometryMap, tb: &TensorBasis2D) -> (Vec<f64>, Vec<f64>) {
    (
        merged_breaks(&tb.bx.knots().breakpoints(), &g.knots_u().breakpoints()),
        merged_breaks(&tb.by.knots().breakpoints(), &g.knots_v().breakpoints()),
    )
}

pub(crate) fn quad_points(
    g: &GeometryMap,
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    order: usize,
) -> Result<Vec<QuadPoint>> {
    let (gn, gw) = gauss_legendre(order);
    let mut out = Vec::with_capacity(order * order);
    for (ty, wy) in gn.iter().zip(&gw) {
        for (tx, wx) in gn.iter().zip(&gw) {
            let x = x0 + (x1 - x0) * tx;
            let y = y0 + (y1 - y0) * ty;
            let map = eval_map(g, x, y, 2)?;
            let det = map.det();
            let j = map.jac;
            let inv = [[j[1][1] / det, -j[0][1] / det], [-j[1][0] / det, j[0][0] / det]];
            out.push(QuadPoint { x, y, weight: wx * wy * (x1 - x0) * (y1 - y0) * det.abs(), map, inv });
        }
    }
    Ok(out)
}

/// Physical gradient and Hessian `[u_x, u_y, u_xx, u_xy, u_yy]` from the
/// parametric derivatives `[û_x̂, û_ŷ, û_x̂x̂, û_x̂ŷ, û_ŷŷ]`.
#[inline]
pub(crate) fn pull_back(q: &QuadPoint, d: [f64; 5]) -> [f64; 5] {
    let k = q.inv; // K = J⁻¹, K[a][i] = ∂x̂_a/∂x_i
    let gx = k[0][0] * d[0] + k[1][0] * d[1];
    let gy = k[0][1] * d[0] + k[1][1] * d[1];
    let h = q.map.hess;
    // Ĥ − Σ_m g_m H_m
    let m00 = d[2] - gx * h[0][0][0] - gy * h[1][0][0];
    let m01 = d[3] - gx * h[0][0][1] - gy * h[1][0][1];
    let m11 = d[4] - gx * h[0][1][1] - gy * h[1][1][1];
    // Kᵀ M K
    let t = |i: usize, j: usize| {
        k[0][i] * (m00 * k[0][j] + m01 * k[1][j]) + k[1][i] * (m01 * k[0][j] + m11 * k[1][j])
    };
    [gx, gy, t(0, 0), t(0, 1), t(1, 1)]
}

/// Active functions in each direction for the cell containing `(x, y)`.
pub(crate) fn tensor_values(tb: &TensorBasis2D, x: f64, y: f64) -> (BasisValues, BasisValues) {
    (eval_transformed_all(&tb.bx, x, 2), eval_transformed_all(&tb.by, y, 2))
}

/// Band width (in indices) of the coupling between transformed functions.
fn coupling_width(tb: &TensorBasis2D) -> usize {
    tb.bx.degree().max(tb.by.degree()) + 1
}

/// Assembles the full tensor-product system without boundary conditions.
pub fn assemble_tensor(
    g: &GeometryMap,
    tb: &TensorBasis2D,
    source: Option<Source<'_>>,
    opts: &AssemblyOptions,
) -> Result<(SparseSym, Vec<f64>)> {
    let (nx, ny) = tb.dims();
    let p = tb.bx.degree().max(tb.by.degree());
    let order = opts.quad_order.unwrap_or(p + 1);
    let w = coupling_width(tb);

    // Banded pattern: row (i, j) holds columns (i', j') with |i − i'|, |j − j'| ≤ w.
    let range = |c: usize, n: usize| (c.saturating_sub(w), (c + w).min(n - 1));
    let mut row_ptr = Vec::with_capacity(nx * ny + 1);
    row_ptr.push(0usize);
    for j in 0..ny {
        for i in 0..nx {
            let (i0, i1) = range(i, nx);
            let (j0, j1) = range(j, ny);
            row_ptr.push(row_ptr.last().unwrap() + (i1 - i0 + 1) * (j1 - j0 + 1));
        }
    }
    let mut vals = vec![0.0; *row_ptr.last().unwrap()];
    let mut rhs = vec![0.0; nx * ny];
    let slot = |i: usize, j: usize, ic: usize, jc: usize| {
        let (i0, i1) = range(i, nx);
        let (j0, _) = range(j, ny);
        row_ptr[i + nx * j] + (jc - j0) * (i1 - i0 + 1) + (ic - i0)
    };

    let (bx, by) = cells(g, tb);
    let mut local: Vec<[f64; 3]> = Vec::new();
    let mut phi: Vec<f64> = Vec::new();
    let mut elem: Vec<f64> = Vec::new();
    let mut elem_rhs: Vec<f64> = Vec::new();
    for cy in by.windows(2) {
        for cx in bx.windows(2) {
            let qps = quad_points(g, cx[0], cx[1], cy[0], cy[1], order)?;
            let (vx0, vy0) = tensor_values(tb, 0.5 * (cx[0] + cx[1]), 0.5 * (cy[0] + cy[1]));
            let (fx, cntx, fy, cnty) = (vx0.first, vx0.count(), vy0.first, vy0.count());
            let nloc = cntx * cnty;
            elem.clear();
            elem.resize(nloc * nloc, 0.0);
            elem_rhs.clear();
            elem_rhs.resize(nloc, 0.0);
            for q in &qps {
                let (vx, vy) = tensor_values(tb, q.x, q.y);
                debug_assert_eq!((vx.first, vy.first), (fx, fy));
                local.clear();
                phi.clear();
                for b in 0..cnty {
                    for a in 0..cntx {
                        let d = [
                            vx.values[1][a] * vy.values[0][b],
                            vx.values[0][a] * vy.values[1][b],
                            vx.values[2][a] * vy.values[0][b],
                            vx.values[1][a] * vy.values[1][b],
                            vx.values[0][a] * vy.values[2][b],
                        ];
                        let h = pull_back(q, d);
                        local.push([h[2], h[3], h[4]]);
                        phi.push(vx.values[0][a] * vy.values[0][b]);
                    }
                }
                for (r, hr) in local.iter().enumerate() {
                    let row = &mut elem[r * nloc..(r + 1) * nloc];
                    let s = [hr[0] * q.weight, 2.0 * hr[1] * q.weight, hr[2] * q.weight];
                    for (e, hc) in row.iter_mut().zip(&local) {
                        *e += s[0] * hc[0] + s[1] * hc[1] + s[2] * hc[2];
                    }
                }
                if let Some(f) = source {
                    let fv = f(q.map.x) * q.weight;
                    for (e, ph) in elem_rhs.iter_mut().zip(&phi) {
                        *e += fv * ph;
                    }
                }
            }
            for r in 0..nloc {
                let (ir, jr) = (fx + r % cntx, fy + r / cntx);
                rhs[ir + nx * jr] += elem_rhs[r];
                for c in 0..nloc {
                    let (ic, jc) = (fx + c % cntx, fy + c / cntx);
                    vals[slot(ir, jr, ic, jc)] += elem[r * nloc + c];
                }
            }
        }
    }

    let mut rows = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (i0, i1) = range(i, nx);
            let (j0, j1) = range(j, ny);
            let mut row = Vec::with_capacity((i1 - i0 + 1) * (j1 - j0 + 1));
            for jc in j0..=j1 {
                for ic in i0..=i1 {
                    row.push((ic + nx * jc, vals[slot(i, j, ic, jc)]));
                }
            }
            rows.push(row);
        }
    }
    Ok((symmetrize(CsrMatrix::from_rows(nx * ny, rows)), rhs))
}

/// Element matrices are symmetric up to summation order; average to make
/// the stored matrix exactly symmetric.
fn symmetrize(m: CsrMatrix) -> SparseSym {
    let t = m.transpose();
    let rows = (0..m.nrows())
        .map(|i| {
            let (c, v) = m.row(i);
            c.iter().zip(v).map(|(&j, &x)| (j, 0.5 * (x + t.get(i, j)))).collect()
        })
        .collect();
    SparseSym::new_unchecked(CsrMatrix::from_rows(m.ncols(), rows))
}

pub fn assemble_local(
    g: &GeometryMap,
    tb: &TensorBasis2D,
    source: Source<'_>,
    dofs: &PatchDofs,
    opts: &AssemblyOptions,
) -> Result<LocalSystem> {
    let (a, f) = assemble_tensor(g, tb, Some(source), opts)?;
    let a = a.principal(&dofs.free);
    let f = dofs.free.iter().map(|&t| f[t]).collect();
    Ok(LocalSystem { a, f, free: dofs.free.clone() })
}
