//! Spline quasi-interpolation of smooth functions and error norms.
//!
//! The 1D operator keeps the two boundary coefficients at each end fixed by
//! point values and inward derivatives and fits the rest by weighted least
//! squares at Gauss points. The 2D operator is its tensor product, so it
//! reproduces the spline space and maps globally C¹ functions into the kernel
//! of the interface constraints.

use nalgebra::DMatrix;

use super::dofs::PatchDofs;
use super::local::{cells, pull_back, quad_points, tensor_values};
use crate::error::Result;
use crate::geometry::{eval_map, GeometryMap, Point};
use crate::splines::{eval_transformed_all, gauss_legendre, TensorBasis2D, TransformedBasis1D};

/// Exact function with derivatives `[u, u_x, u_y, u_xx, u_xy, u_yy]`.
pub type Exact<'a> = &'a (dyn Fn(Point) -> [f64; 6] + Sync);

#[derive(Clone, Copy, Debug)]
enum Functional {
    Value(f64),
    Deriv(f64),
}

/// Linear map from functional samples to coefficients, `N × samples`.
struct Operator1D {
    samples: Vec<Functional>,
    map: DMatrix<f64>,
}

fn operator_1d(tb: &TransformedBasis1D) -> Operator1D {
    let n = tb.len();
    let p = tb.degree();
    let (gn, gw) = gauss_legendre(p + 1);
    let mut samples = vec![
        Functional::Value(0.0),
        Functional::Deriv(0.0),
        Functional::Value(1.0),
        Functional::Deriv(1.0),
    ];
    let mut weights = Vec::new();
    for (a, b) in tb.knots().spans() {
        for (t, w) in gn.iter().zip(&gw) {
            samples.push(Functional::Value(a + (b - a) * t));
            weights.push(w * (b - a));
        }
    }
    let ns = samples.len();
    let mut map = DMatrix::zeros(n, ns);
    map[(0, 0)] = 1.0;
    map[(1, 1)] = 1.0;
    map[(n - 1, 2)] = 1.0;
    map[(n - 2, 3)] = -1.0;
    let ni = n - 4;
    if ni > 0 {
        // Point values of all ψ at the fit points.
        let nq = ns - 4;
        let mut bmat = DMatrix::zeros(nq, n);
        for q in 0..nq {
            let Functional::Value(x) = samples[q + 4] else { unreachable!() };
            let v = eval_transformed_all(tb, x, 0);
            for k in 0..v.count() {
                bmat[(q, v.first + k)] = v.values[0][k];
            }
        }
        let bi = bmat.columns(2, ni).into_owned();
        let mut bw = bi.transpose();
        for (q, w) in weights.iter().enumerate() {
            bw.column_mut(q).scale_mut(*w);
        }
        let gram = &bw * &bi;
        let chol = gram.cholesky().expect("Gram matrix of a spline basis is SPD");
        // Residual samples: g − B_b c_b, with c_b = map[boundary rows] · s.
        let mut resid = DMatrix::zeros(nq, ns);
        for q in 0..nq {
            resid[(q, q + 4)] = 1.0;
        }
        for &r in &[0, 1, n - 2, n - 1] {
            let col = bmat.column(r).into_owned();
            let row = map.row(r).into_owned();
            resid -= col * row;
        }
        let inner = chol.solve(&(bw * resid));
        map.rows_mut(2, ni).copy_from(&inner);
    }
    Operator1D { samples, map }
}

/// Parametric derivatives `[f̂, f̂_x̂, f̂_ŷ, f̂_x̂ŷ]` of `f ∘ G`.
fn pulled_samples(g: &GeometryMap, exact: Exact<'_>, x: f64, y: f64) -> Result<[f64; 4]> {
    let m = eval_map(g, x, y, 2)?;
    let e = exact(m.x);
    let grad = [e[1], e[2]];
    let hess = [[e[3], e[4]], [e[4], e[5]]];
    let j = m.jac;
    let dx = grad[0] * j[0][0] + grad[1] * j[1][0];
    let dy = grad[0] * j[0][1] + grad[1] * j[1][1];
    let mut dxy = grad[0] * m.hess[0][0][1] + grad[1] * m.hess[1][0][1];
    for a in 0..2 {
        for b in 0..2 {
            dxy += hess[a][b] * j[a][0] * j[b][1];
        }
    }
    Ok([e[0], dx, dy, dxy])
}

/// Tensor coefficients of the quasi-interpolant of `exact` on one patch.
pub fn interpolate(g: &GeometryMap, tb: &TensorBasis2D, exact: Exact<'_>) -> Result<Vec<f64>> {
    let ox = operator_1d(&tb.bx);
    let oy = operator_1d(&tb.by);
    let (sx, sy) = (ox.samples.len(), oy.samples.len());
    let mut s = DMatrix::zeros(sx, sy);
    for (b, fy) in oy.samples.iter().enumerate() {
        for (a, fx) in ox.samples.iter().enumerate() {
            let (x, dx) = match *fx {
                Functional::Value(x) => (x, false),
                Functional::Deriv(x) => (x, true),
            };
            let (y, dy) = match *fy {
                Functional::Value(y) => (y, false),
                Functional::Deriv(y) => (y, true),
            };
            let v = pulled_samples(g, exact, x, y)?;
            s[(a, b)] = v[usize::from(dx) + 2 * usize::from(dy)];
        }
    }
    let c = &ox.map * s * oy.map.transpose();
    let (nx, ny) = tb.dims();
    let mut out = vec![0.0; nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            out[i + nx * j] = c[(i, j)];
        }
    }
    Ok(out)
}

/// Quasi-interpolant restricted to the free dofs of a clamped patch.
pub fn interpolate_boundary_free(
    g: &GeometryMap,
    tb: &TensorBasis2D,
    exact: Exact<'_>,
    dofs: &PatchDofs,
) -> Result<Vec<f64>> {
    let full = interpolate(g, tb, exact)?;
    Ok(dofs.free.iter().map(|&t| full[t]).collect())
}

/// Squared error norms on one patch.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ErrorNorms {
    pub l2_sq: f64,
    pub h1_semi_sq: f64,
    pub h2_semi_sq: f64,
}

impl ErrorNorms {
    pub fn add(self, o: ErrorNorms) -> ErrorNorms {
        ErrorNorms {
            l2_sq: self.l2_sq + o.l2_sq,
            h1_semi_sq: self.h1_semi_sq + o.h1_semi_sq,
            h2_semi_sq: self.h2_semi_sq + o.h2_semi_sq,
        }
    }
}

/// Errors of the spline with tensor coefficients `coeffs` against `exact`;
/// pass `None` for a zero reference to get the norms of the spline itself.
pub fn patch_error(
    g: &GeometryMap,
    tb: &TensorBasis2D,
    coeffs: &[f64],
    exact: Option<Exact<'_>>,
    quad_order: Option<usize>,
) -> Result<ErrorNorms> {
    let p = tb.bx.degree().max(tb.by.degree());
    let order = quad_order.unwrap_or(p + 3);
    let (nx, _) = tb.dims();
    let (bx, by) = cells(g, tb);
    let mut out = ErrorNorms::default();
    for cy in by.windows(2) {
        for cx in bx.windows(2) {
            for q in quad_points(g, cx[0], cx[1], cy[0], cy[1], order)? {
                let (vx, vy) = tensor_values(tb, q.x, q.y);
                let mut d = [0.0; 6];
                for b in 0..vy.count() {
                    for a in 0..vx.count() {
                        let c = coeffs[vx.first + a + nx * (vy.first + b)];
                        if c == 0.0 {
                            continue;
                        }
                        d[0] += c * vx.values[0][a] * vy.values[0][b];
                        d[1] += c * vx.values[1][a] * vy.values[0][b];
                        d[2] += c * vx.values[0][a] * vy.values[1][b];
                        d[3] += c * vx.values[2][a] * vy.values[0][b];
                        d[4] += c * vx.values[1][a] * vy.values[1][b];
                        d[5] += c * vx.values[0][a] * vy.values[2][b];
                    }
                }
                let ph = pull_back(&q, [d[1], d[2], d[3], d[4], d[5]]);
                let e = exact.map_or([0.0; 6], |f| f(q.map.x));
                let r = [d[0] - e[0], ph[0] - e[1], ph[1] - e[2], ph[2] - e[3], ph[3] - e[4], ph[4] - e[5]];
                out.l2_sq += q.weight * r[0] * r[0];
                out.h1_semi_sq += q.weight * (r[1] * r[1] + r[2] * r[2]);
                out.h2_semi_sq += q.weight * (r[3] * r[3] + 2.0 * r[4] * r[4] + r[5] * r[5]);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::domains::annulus_base;

    fn identity() -> GeometryMap {
        GeometryMap::rectangle(0.0, 1.0, 0.0, 1.0)
    }

    fn max_diff_at(g: &GeometryMap, tb: &TensorBasis2D, c: &[f64], f: Exact<'_>) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..=10 {
            for j in 0..=10 {
                let (x, y) = (i as f64 / 10.0, j as f64 / 10.0);
                let v = tb.eval_function(c, x, y)[0];
                m = m.max((v - f(g.point(x, y))[0]).abs());
            }
        }
        m
    }

    #[test]
    fn zero_function() {
        let tb = TensorBasis2D::uniform(3, 2).unwrap();
        let c = interpolate(&identity(), &tb, &|_| [0.0; 6]).unwrap();
        assert!(c.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn affine_and_quadratic_reproduced() {
        let f = |x: Point| {
            let (a, b) = (x[0], x[1]);
            [1.0 + 2.0 * a - b + a * a - a * b + 3.0 * b * b, 2.0 + 2.0 * a - b, -1.0 - a + 6.0 * b, 2.0, -1.0, 6.0]
        };
        for p in 2..=4 {
            let tb = TensorBasis2D::uniform(p, 2).unwrap();
            let g = annulus_base().restrict(0.0, 1.0, 0.0, 1.0);
            for g in [identity(), g] {
                let c = interpolate(&g, &tb, &f).unwrap();
                let e = patch_error(&g, &tb, &c, Some(&f), None).unwrap();
                if g == identity() {
                    assert!(max_diff_at(&g, &tb, &c, &f) < 1e-12);
                    assert!(e.h2_semi_sq < 1e-20, "{e:?}");
                } else {
                    // Quadratics in x are not splines in x̂ on a curved map.
                    assert!(e.h2_semi_sq > 0.0);
                }
            }
        }
    }

    #[test]
    fn boundary_coefficients_are_traces() {
        let f = |x: Point| {
            let (s, c) = (x[0].sin() * x[1].exp(), x[0].cos() * x[1].exp());
            [s, c, s, -s, c, s]
        };
        let g = annulus_base();
        let tb = TensorBasis2D::uniform(2, 3).unwrap();
        let c = interpolate(&g, &tb, &f).unwrap();
        let (nx, ny) = tb.dims();
        for j in [0, ny - 1] {
            for i in [0, nx - 1] {
                let y = if j == 0 { 0.0 } else { 1.0 };
                let x = if i == 0 { 0.0 } else { 1.0 };
                assert!((c[i + nx * j] - f(g.point(x, y))[0]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn smooth_function_converges() {
        let f = |x: Point| {
            let (sx, cx, sy, cy) = (x[0].sin(), x[0].cos(), x[1].sin(), x[1].cos());
            [sx * sy, cx * sy, sx * cy, -sx * sy, cx * cy, -sx * sy]
        };
        let g = annulus_base();
        let errs: Vec<f64> = (2..=4)
            .map(|r| {
                let tb = TensorBasis2D::uniform(3, r).unwrap();
                let c = interpolate(&g, &tb, &f).unwrap();
                patch_error(&g, &tb, &c, Some(&f), None).unwrap().h2_semi_sq.sqrt()
            })
            .collect();
        for w in errs.windows(2) {
            assert!(w[0] / w[1] > 3.0, "{errs:?}");
        }
    }
}
