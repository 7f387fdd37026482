//! Tensor-product B-spline maps `G : [0,1]² → ℝ²`.

use super::GeometryError;
use crate::splines::{eval_bspline_all, KnotVector};

pub type Point = [f64; 2];

/// B-spline patch map; control point `(i, j)` sits at index `i + n_u j`.
#[derive(Clone, Debug, PartialEq)]
pub struct GeometryMap {
    ku: KnotVector,
    kv: KnotVector,
    cps: Vec<Point>,
}

/// Point, Jacobian `J[i][j] = ∂G_i/∂x̂_j` and second derivatives
/// `H[m][a][b] = ∂²G_m/∂x̂_a∂x̂_b`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MapEval {
    pub x: Point,
    pub jac: [[f64; 2]; 2],
    pub hess: [[[f64; 2]; 2]; 2],
}

impl MapEval {
    pub fn det(&self) -> f64 {
        self.jac[0][0] * self.jac[1][1] - self.jac[0][1] * self.jac[1][0]
    }
}

impl GeometryMap {
    pub fn new(ku: KnotVector, kv: KnotVector, cps: Vec<Point>) -> Result<Self, GeometryError> {
        if cps.len() != ku.len() * kv.len() {
            return Err(GeometryError::Invalid(format!(
                "expected {} x {} control points, found {}",
                ku.len(),
                kv.len(),
                cps.len()
            )));
        }
        if cps.iter().flatten().any(|c| !c.is_finite()) {
            return Err(GeometryError::Invalid("non-finite control point".into()));
        }
        Ok(Self { ku, kv, cps })
    }

    /// Bilinear map onto `[x0, x1] × [y0, y1]`.
    pub fn rectangle(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        let k = KnotVector::bezier(1);
        let cps = vec![[x0, y0], [x1, y0], [x0, y1], [x1, y1]];
        Self { ku: k.clone(), kv: k, cps }
    }

    pub fn knots_u(&self) -> &KnotVector {
        &self.ku
    }

    pub fn knots_v(&self) -> &KnotVector {
        &self.kv
    }

    pub fn knots(&self, dir: usize) -> &KnotVector {
        if dir == 0 {
            &self.ku
        } else {
            &self.kv
        }
    }

    pub fn control_points(&self) -> &[Point] {
        &self.cps
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.ku.len(), self.kv.len())
    }

    /// Diagonal of the control-point bounding box.
    pub fn diameter(&self) -> f64 {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for c in &self.cps {
            for d in 0..2 {
                lo[d] = lo[d].min(c[d]);
                hi[d] = hi[d].max(c[d]);
            }
        }
        ((hi[0] - lo[0]).powi(2) + (hi[1] - lo[1]).powi(2)).sqrt()
    }

    pub fn point(&self, u: f64, v: f64) -> Point {
        self.eval_raw(u, v, 0).x
    }

    fn eval_raw(&self, u: f64, v: f64, order: usize) -> MapEval {
        let bu = eval_bspline_all(&self.ku, u, order);
        let bv = eval_bspline_all(&self.kv, v, order);
        let nu = self.ku.len();
        let mut x = [0.0; 2];
        let mut jac = [[0.0; 2]; 2];
        let mut hess = [[[0.0; 2]; 2]; 2];
        for (b, j) in (bv.first..bv.first + bv.count()).enumerate() {
            for (a, i) in (bu.first..bu.first + bu.count()).enumerate() {
                let c = self.cps[i + nu * j];
                let n00 = bu.values[0][a] * bv.values[0][b];
                for m in 0..2 {
                    x[m] += c[m] * n00;
                }
                if order >= 1 {
                    let du = bu.values[1][a] * bv.values[0][b];
                    let dv = bu.values[0][a] * bv.values[1][b];
                    for m in 0..2 {
                        jac[m][0] += c[m] * du;
                        jac[m][1] += c[m] * dv;
                    }
                }
                if order >= 2 {
                    let duu = bu.values[2][a] * bv.values[0][b];
                    let duv = bu.values[1][a] * bv.values[1][b];
                    let dvv = bu.values[0][a] * bv.values[2][b];
                    for m in 0..2 {
                        hess[m][0][0] += c[m] * duu;
                        hess[m][0][1] += c[m] * duv;
                        hess[m][1][1] += c[m] * dvv;
                    }
                }
            }
        }
        for h in hess.iter_mut() {
            h[1][0] = h[0][1];
        }
        MapEval { x, jac, hess }
    }

    /// Inserts `x` once in direction `dir` (Boehm's algorithm).
    pub fn insert_knot(&mut self, dir: usize, x: f64) {
        let (nu, nv) = self.dims();
        let kv = self.knots(dir).clone();
        let p = kv.degree();
        let k = kv.knots();
        let s = kv.find_span(x);
        let n_old = kv.len();
        let (lines, len) = if dir == 0 { (nv, nu) } else { (nu, nv) };
        let idx = |line: usize, i: usize, n: usize| if dir == 0 { i + n * line } else { line + nu * i };
        let new_len = len + 1;
        let (new_nu, new_nv) = if dir == 0 { (nu + 1, nv) } else { (nu, nv + 1) };
        let mut out = vec![[0.0; 2]; new_nu * new_nv];
        let idx_new = |line: usize, i: usize| if dir == 0 { i + new_nu * line } else { line + new_nu * i };
        for line in 0..lines {
            let old = |i: usize| self.cps[idx(line, i, nu)];
            for i in 0..new_len {
                let q = if i + p <= s {
                    old(i)
                } else if i > s {
                    old(i - 1)
                } else {
                    let a = (x - k[i]) / (k[i + p] - k[i]);
                    let (c0, c1) = (old(i - 1), old(i));
                    [(1.0 - a) * c0[0] + a * c1[0], (1.0 - a) * c0[1] + a * c1[1]]
                };
                out[idx_new(line, i)] = q;
            }
        }
        debug_assert_eq!(n_old + 1, new_len);
        let mut knots = k.to_vec();
        knots.insert(s + 1, x);
        let new_kv = KnotVector::new(p, knots).expect("knot insertion keeps validity");
        if dir == 0 {
            self.ku = new_kv;
        } else {
            self.kv = new_kv;
        }
        self.cps = out;
    }

    /// Restriction to `[a0, a1] × [b0, b1]`, reparameterized onto `[0,1]²`.
    pub fn restrict(&self, a0: f64, a1: f64, b0: f64, b1: f64) -> GeometryMap {
        let mut g = self.clone();
        for (dir, cuts) in [(0, [a0, a1]), (1, [b0, b1])] {
            for &c in &cuts {
                if c > 0.0 && c < 1.0 {
                    let p = g.knots(dir).degree();
                    let have = g.knots(dir).knots().iter().filter(|&&k| k == c).count();
                    for _ in have..p {
                        g.insert_knot(dir, c);
                    }
                }
            }
        }
        let (ru, iu0) = extract(g.knots(0), a0, a1);
        let (rv, iv0) = extract(g.knots(1), b0, b1);
        let (nu, _) = g.dims();
        let mut cps = Vec::with_capacity(ru.len() * rv.len());
        for j in 0..rv.len() {
            for i in 0..ru.len() {
                cps.push(g.cps[(iu0 + i) + nu * (iv0 + j)]);
            }
        }
        GeometryMap { ku: ru, kv: rv, cps }
    }
}

/// Knot vector of the segment `[a, b]` (whose ends have multiplicity `≥ p`)
/// rescaled to `[0, 1]`, and the index of its first control point.
fn extract(kv: &KnotVector, a: f64, b: f64) -> (KnotVector, usize) {
    let p = kv.degree();
    let k = kv.knots();
    let ia = k.iter().rposition(|&t| t == a).expect("segment start is a knot");
    let j0 = ia - p;
    let mut knots = vec![0.0; p + 1];
    knots.extend(k.iter().filter(|&&t| t > a && t < b).map(|t| (t - a) / (b - a)));
    knots.extend(std::iter::repeat(1.0).take(p + 1));
    (KnotVector::new(p, knots).expect("extracted segment is open"), j0)
}

/// Evaluates `G`, `∇G` and `∇²G` at `(u, v)`.
///
/// Fails when `order ≥ 1` and `|det J| < 1e-14 H²`.
pub fn eval_map(g: &GeometryMap, u: f64, v: f64, order: usize) -> Result<MapEval, GeometryError> {
    let e = g.eval_raw(u, v, order.min(2));
    if order >= 1 {
        let h = g.diameter();
        if e.det().abs() < 1e-14 * h * h {
            return Err(GeometryError::DegenerateJacobian { u, v, det: e.det() });
        }
    }
    Ok(e)
}

/// Splits `g` into `m × n` maps on equal parameter sub-rectangles, ordered
/// with the first direction varying fastest.
pub fn split_patch(g: &GeometryMap, m: usize, n: usize) -> Vec<GeometryMap> {
    assert!(m >= 1 && n >= 1, "split counts must be positive");
    let mut out = Vec::with_capacity(m * n);
    for j in 0..n {
        for i in 0..m {
            out.push(g.restrict(
                i as f64 / m as f64,
                (i + 1) as f64 / m as f64,
                j as f64 / n as f64,
                (j + 1) as f64 / n as f64,
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::domains::annulus_base;

    fn identity() -> GeometryMap {
        GeometryMap::rectangle(0.0, 1.0, 0.0, 1.0)
    }

    #[test]
    fn identity_and_scaling() {
        let e = eval_map(&identity(), 0.3, 0.7, 2).unwrap();
        assert_eq!(e.x, [0.3, 0.7]);
        assert_eq!(e.jac, [[1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(e.hess, [[[0.0; 2]; 2]; 2]);
        let s = GeometryMap::rectangle(0.0, 2.0, 0.0, 2.0);
        assert!((eval_map(&s, 0.5, 0.5, 1).unwrap().det() - 4.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_map_is_rejected() {
        let k = KnotVector::bezier(1);
        let g = GeometryMap::new(k.clone(), k, vec![[0.0, 0.0], [1.0, 0.0], [0.0, 0.0], [1.0, 0.0]]).unwrap();
        assert!(matches!(eval_map(&g, 0.5, 0.5, 1), Err(GeometryError::DegenerateJacobian { .. })));
    }

    #[test]
    fn annulus_corner_matches_de_casteljau() {
        let g = annulus_base();
        let e = eval_map(&g, 0.0, 0.0, 1).unwrap();
        assert!((e.x[0] - 1.0).abs() < 1e-14 && e.x[1].abs() < 1e-14);
        // Arc (1,0),(1,1),(0,1): tangent at 0 is 2((1,1) - (1,0)).
        assert!(e.jac[0][1].abs() < 1e-12 && (e.jac[1][1] - 2.0).abs() < 1e-12);
        // Radial direction from r = 1 to r = 2.
        assert!((e.jac[0][0] - 1.0).abs() < 1e-12 && e.jac[1][0].abs() < 1e-12);
        let mid = g.point(0.0, 0.5);
        let casteljau = [0.25 + 0.5, 0.5 + 0.25];
        assert!((mid[0] - casteljau[0]).abs() < 1e-14 && (mid[1] - casteljau[1]).abs() < 1e-14);
    }

    #[test]
    fn split_arc_reproduces_curve() {
        let g = annulus_base();
        let parts = split_patch(&g, 1, 2);
        for k in 0..100 {
            let t = k as f64 / 99.0;
            let u = 0.37;
            let ref_pt = g.point(u, t);
            let (part, local) = if t <= 0.5 { (&parts[0], 2.0 * t) } else { (&parts[1], 2.0 * t - 1.0) };
            let p = part.point(u, local);
            assert!((p[0] - ref_pt[0]).abs() < 1e-12 && (p[1] - ref_pt[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn split_identity_gives_quadrants() {
        let parts = split_patch(&identity(), 2, 2);
        assert_eq!(parts.len(), 4);
        let e = eval_map(&parts[3], 0.0, 0.0, 2).unwrap();
        assert_eq!(e.x, [0.5, 0.5]);
        assert!((e.det() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn split_union_matches_original() {
        let g = annulus_base();
        let parts = split_patch(&g, 3, 4);
        let mut seed = 0.123f64;
        for _ in 0..200 {
            seed = (seed * 997.0 + 0.31).fract();
            let u = seed;
            seed = (seed * 991.0 + 0.17).fract();
            let v = seed;
            let i = ((u * 3.0) as usize).min(2);
            let j = ((v * 4.0) as usize).min(3);
            let p = parts[i + 3 * j].point(u * 3.0 - i as f64, v * 4.0 - j as f64);
            let q = g.point(u, v);
            assert!((p[0] - q[0]).abs() < 1e-12 && (p[1] - q[1]).abs() < 1e-12);
        }
    }
}
