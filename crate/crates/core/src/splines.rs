//! B-spline spaces on open knot vectors and the boundary-adapted basis.
//!
//! [`TransformedBasis1D`] recombines the first two and the last two B-splines
//! so that at each end one function carries the value and one carries the
//! derivative taken in the inward direction:
//!
//! * `ψ₀ = φ₀ + φ₁`, `ψ₁ = s_l φ₁`
//! * `ψ_{N−2} = s_r φ_{N−2}`, `ψ_{N−1} = φ_{N−2} + φ_{N−1}`
//!
//! with `s_l = ξ_{p+1}/p` and `s_r = (1 − ξ_{N−1})/p`. Indices here are
//! 0-based. All other functions are plain B-splines.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SplineError {
    #[error("invalid knot vector: {0}")]
    InvalidKnots(String),
    #[error("degree {0} is too low; at least 2 is required for a C1 space")]
    DegreeTooLow(usize),
    #[error("space has {0} functions; at least 4 are required")]
    TooFewFunctions(usize),
    #[error("interior knot {knot} has multiplicity {mult}, above degree - 1 = {max}")]
    Multiplicity { knot: f64, mult: usize, max: usize },
    #[error("largest knot span {0} exceeds 1/4")]
    MeshTooCoarse(f64),
}

/// Nondecreasing `p`-open knot vector on `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KnotVectorRaw", into = "KnotVectorRaw")]
pub struct KnotVector {
    degree: usize,
    knots: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct KnotVectorRaw {
    degree: usize,
    knots: Vec<f64>,
}

impl TryFrom<KnotVectorRaw> for KnotVector {
    type Error = SplineError;
    fn try_from(r: KnotVectorRaw) -> Result<Self, SplineError> {
        KnotVector::new(r.degree, r.knots)
    }
}

impl From<KnotVector> for KnotVectorRaw {
    fn from(k: KnotVector) -> Self {
        KnotVectorRaw { degree: k.degree, knots: k.knots }
    }
}

impl KnotVector {
    /// Validates openness, monotonicity and interior multiplicity `≤ p`.
    pub fn new(degree: usize, knots: Vec<f64>) -> Result<Self, SplineError> {
        let p = degree;
        if p == 0 {
            return Err(SplineError::InvalidKnots("degree must be positive".into()));
        }
        if knots.len() < 2 * p + 2 {
            return Err(SplineError::InvalidKnots(format!(
                "{} knots are too few for degree {p}",
                knots.len()
            )));
        }
        if knots.iter().any(|k| !k.is_finite()) {
            return Err(SplineError::InvalidKnots("non-finite knot".into()));
        }
        if knots.windows(2).any(|w| w[1] < w[0]) {
            return Err(SplineError::InvalidKnots("knots must be nondecreasing".into()));
        }
        let m = knots.len();
        if knots[..=p].iter().any(|&k| k != 0.0) || knots[m - p - 1..].iter().any(|&k| k != 1.0) {
            return Err(SplineError::InvalidKnots(format!(
                "first and last knots must be 0 and 1 repeated {} times",
                p + 1
            )));
        }
        let kv = Self { degree, knots };
        for (knot, mult) in kv.interior_breaks() {
            if mult > p {
                return Err(SplineError::Multiplicity { knot, mult, max: p });
            }
        }
        Ok(kv)
    }

    /// Degree `p` with `2^r − 1` equally spaced simple interior knots.
    pub fn uniform(degree: usize, refinement: u32) -> Self {
        let cells = 1usize << refinement;
        let mut knots = vec![0.0; degree + 1];
        knots.extend((1..cells).map(|i| i as f64 / cells as f64));
        knots.extend(std::iter::repeat(1.0).take(degree + 1));
        Self { degree, knots }
    }

    /// Single Bézier segment of the given degree.
    pub fn bezier(degree: usize) -> Self {
        Self::uniform(degree, 0)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Number of B-splines `N`.
    pub fn len(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Distinct interior knots with multiplicities.
    pub fn interior_breaks(&self) -> Vec<(f64, usize)> {
        let p = self.degree;
        let inner = &self.knots[p + 1..self.knots.len() - p - 1];
        let mut out: Vec<(f64, usize)> = Vec::new();
        for &k in inner {
            match out.last_mut() {
                Some((v, m)) if *v == k => *m += 1,
                _ => out.push((k, 1)),
            }
        }
        out
    }

    /// Distinct knot values including 0 and 1.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b = vec![0.0];
        b.extend(self.interior_breaks().into_iter().map(|(k, _)| k));
        b.push(1.0);
        b
    }

    /// Nonempty knot spans as `(a, b)`.
    pub fn spans(&self) -> Vec<(f64, f64)> {
        self.breakpoints().windows(2).map(|w| (w[0], w[1])).collect()
    }

    /// Largest span length `ĥ`.
    pub fn h_max(&self) -> f64 {
        self.spans().iter().map(|(a, b)| b - a).fold(0.0, f64::max)
    }

    pub fn h_min(&self) -> f64 {
        self.spans().iter().map(|(a, b)| b - a).fold(f64::INFINITY, f64::min)
    }

    /// Ratio `ĥ / ĥ_min`.
    pub fn quasi_uniformity(&self) -> f64 {
        self.h_max() / self.h_min()
    }

    /// Index `s` with `ξ_s ≤ x < ξ_{s+1}`; `x = 1` maps to the last nonempty span.
    pub fn find_span(&self, x: f64) -> usize {
        let p = self.degree;
        let n = self.len();
        if x >= self.knots[n] {
            return n - 1;
        }
        if x <= self.knots[p] {
            return p;
        }
        // Largest s in [p, n-1] with knots[s] <= x.
        let mut lo = p;
        let mut hi = n;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.knots[mid] <= x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    /// Conditions required of the discretization space: `p ≥ 2`, `N ≥ 4`,
    /// interior multiplicity `≤ p − 1`.
    pub fn check_c1_space(&self) -> Result<(), SplineError> {
        if self.degree < 2 {
            return Err(SplineError::DegreeTooLow(self.degree));
        }
        if self.len() < 4 {
            return Err(SplineError::TooFewFunctions(self.len()));
        }
        for (knot, mult) in self.interior_breaks() {
            if mult + 1 > self.degree {
                return Err(SplineError::Multiplicity { knot, mult, max: self.degree - 1 });
            }
        }
        Ok(())
    }

    /// `ĥ ≤ 1/4`.
    pub fn check_fine(&self) -> Result<(), SplineError> {
        let h = self.h_max();
        if h > 0.25 + 1e-15 {
            Err(SplineError::MeshTooCoarse(h))
        } else {
            Ok(())
        }
    }
}

/// Values of the functions active at a point: `values[d][k]` is the `d`-th
/// derivative of function `first + k`.
#[derive(Clone, Debug, PartialEq)]
pub struct BasisValues {
    pub first: usize,
    pub values: Vec<Vec<f64>>,
}

impl BasisValues {
    pub fn count(&self) -> usize {
        self.values[0].len()
    }

    /// `d`-th derivative of global function `i` (zero if inactive).
    pub fn get(&self, d: usize, i: usize) -> f64 {
        if i < self.first || i >= self.first + self.count() {
            0.0
        } else {
            self.values[d][i - self.first]
        }
    }
}

/// The `p + 1` nonzero B-splines at `x` and derivatives up to `max_deriv`.
pub fn eval_bspline_all(kv: &KnotVector, x: f64, max_deriv: usize) -> BasisValues {
    let p = kv.degree;
    let u = &kv.knots;
    let x = x.clamp(0.0, 1.0);
    let s = kv.find_span(x);

    // ndu[j][r]: basis functions (upper triangle incl. diagonal) and knot differences (lower).
    let mut ndu = vec![vec![0.0; p + 1]; p + 1];
    let mut left = vec![0.0; p + 1];
    let mut right = vec![0.0; p + 1];
    ndu[0][0] = 1.0;
    for j in 1..=p {
        left[j] = x - u[s + 1 - j];
        right[j] = u[s + j] - x;
        let mut saved = 0.0;
        for r in 0..j {
            ndu[j][r] = right[r + 1] + left[j - r];
            let temp = ndu[r][j - 1] / ndu[j][r];
            ndu[r][j] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu[j][j] = saved;
    }

    let nd = max_deriv.min(p);
    let mut ders = vec![vec![0.0; p + 1]; max_deriv + 1];
    for j in 0..=p {
        ders[0][j] = ndu[j][p];
    }
    let mut a = vec![vec![0.0; p + 1]; 2];
    for r in 0..=p {
        let (mut s1, mut s2) = (0usize, 1usize);
        a[0][0] = 1.0;
        for k in 1..=nd {
            let mut d = 0.0;
            let rk = r as isize - k as isize;
            let pk = p - k;
            if r >= k {
                a[s2][0] = a[s1][0] / ndu[pk + 1][rk as usize];
                d = a[s2][0] * ndu[rk as usize][pk];
            }
            let j1 = if rk >= -1 { 1 } else { (-rk) as usize };
            let j2 = if (r as isize) - 1 <= pk as isize { k - 1 } else { p - r };
            for j in j1..=j2 {
                let idx = (rk + j as isize) as usize;
                a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][idx];
                d += a[s2][j] * ndu[idx][pk];
            }
            if r <= pk {
                a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                d += a[s2][k] * ndu[r][pk];
            }
            ders[k][r] = d;
            std::mem::swap(&mut s1, &mut s2);
        }
    }
    let mut factor = p as f64;
    for (k, row) in ders.iter_mut().enumerate().skip(1).take(nd) {
        for v in row.iter_mut() {
            *v *= factor;
        }
        factor *= (p - k) as f64;
    }
    BasisValues { first: s - p, values: ders }
}

/// Boundary-adapted basis built on a [`KnotVector`].
#[derive(Clone, Debug, PartialEq)]
pub struct TransformedBasis1D {
    kv: KnotVector,
    scale_left: f64,
    scale_right: f64,
}

impl TransformedBasis1D {
    pub fn new(kv: KnotVector) -> Result<Self, SplineError> {
        kv.check_c1_space()?;
        let p = kv.degree as f64;
        let n = kv.len();
        let scale_left = kv.knots[kv.degree + 1] / p;
        let scale_right = (1.0 - kv.knots[n - 1]) / p;
        Ok(Self { kv, scale_left, scale_right })
    }

    /// Uniform space with `2^r` cells.
    pub fn uniform(degree: usize, refinement: u32) -> Result<Self, SplineError> {
        Self::new(KnotVector::uniform(degree, refinement))
    }

    pub fn knots(&self) -> &KnotVector {
        &self.kv
    }

    pub fn degree(&self) -> usize {
        self.kv.degree
    }

    pub fn len(&self) -> usize {
        self.kv.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn scale_left(&self) -> f64 {
        self.scale_left
    }

    pub fn scale_right(&self) -> f64 {
        self.scale_right
    }

    /// Sign turning a `d/dx` derivative at an endpoint into the outward-normal
    /// derivative: `−1` at 0, `+1` at 1.
    pub fn outward_sign(at_right_end: bool) -> f64 {
        if at_right_end {
            1.0
        } else {
            -1.0
        }
    }
}

/// Transformed functions active at `x` with derivatives up to `max_deriv`.
pub fn eval_transformed_all(tb: &TransformedBasis1D, x: f64, max_deriv: usize) -> BasisValues {
    let phi = eval_bspline_all(&tb.kv, x, max_deriv);
    let n = tb.len();
    let p = tb.degree();
    let f = phi.first;
    let lo = if f <= 1 { 0 } else { f };
    let hi = if f + p >= n - 2 { n - 1 } else { f + p };
    let mut values = vec![vec![0.0; hi - lo + 1]; max_deriv + 1];
    for (d, row) in values.iter_mut().enumerate() {
        for k in 0..=p {
            let i = f + k;
            let v = phi.values[d][k];
            if i == 0 {
                row[0] += v;
            } else if i == 1 {
                row[0] += v;
                row[1 - lo] += tb.scale_left * v;
            } else if i == n - 2 {
                row[n - 2 - lo] += tb.scale_right * v;
                row[n - 1 - lo] += v;
            } else if i == n - 1 {
                row[n - 1 - lo] += v;
            } else {
                row[i - lo] += v;
            }
        }
    }
    BasisValues { first: lo, values }
}

/// Dense change of basis `T` with `Ψ = Φ T`, row-major `N × N`.
pub fn transform_matrix(tb: &TransformedBasis1D) -> Vec<Vec<f64>> {
    let n = tb.len();
    let mut t = vec![vec![0.0; n]; n];
    t[0][0] = 1.0;
    t[1][0] = 1.0;
    t[1][1] = tb.scale_left;
    for (i, row) in t.iter_mut().enumerate().take(n - 2).skip(2) {
        row[i] = 1.0;
    }
    t[n - 2][n - 2] = tb.scale_right;
    t[n - 2][n - 1] = 1.0;
    t[n - 1][n - 1] = 1.0;
    t
}

/// Tensor product of two transformed bases; dof `(i, j)` has index `i + N_x j`.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorBasis2D {
    pub bx: TransformedBasis1D,
    pub by: TransformedBasis1D,
}

impl TensorBasis2D {
    pub fn new(bx: TransformedBasis1D, by: TransformedBasis1D) -> Self {
        Self { bx, by }
    }

    pub fn uniform(degree: usize, refinement: u32) -> Result<Self, SplineError> {
        let b = TransformedBasis1D::uniform(degree, refinement)?;
        Ok(Self { bx: b.clone(), by: b })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.bx.len(), self.by.len())
    }

    pub fn len(&self) -> usize {
        self.bx.len() * self.by.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i + self.bx.len() * j
    }

    pub fn split_index(&self, k: usize) -> (usize, usize) {
        (k % self.bx.len(), k / self.bx.len())
    }

    /// `∂^a_x ∂^b_y` of `Σ c_k ψ_k` at `(x, y)` for `a + b ≤ 2`.
    pub fn eval_function(&self, coeffs: &[f64], x: f64, y: f64) -> [f64; 6] {
        let vx = eval_transformed_all(&self.bx, x, 2);
        let vy = eval_transformed_all(&self.by, y, 2);
        let mut out = [0.0; 6];
        const ORDERS: [(usize, usize); 6] = [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)];
        for (jj, j) in (vy.first..vy.first + vy.count()).enumerate() {
            for (ii, i) in (vx.first..vx.first + vx.count()).enumerate() {
                let c = coeffs[self.index(i, j)];
                if c == 0.0 {
                    continue;
                }
                for (o, &(a, b)) in ORDERS.iter().enumerate() {
                    out[o] += c * vx.values[a][ii] * vy.values[b][jj];
                }
            }
        }
        out
    }
}

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1);
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for k in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * k + 1) as f64 * z * p1 - k as f64 * p2) / (k + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = 0.5 * (1.0 - z);
        nodes[n - 1 - i] = 0.5 * (1.0 + z);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.5;
    }
    (nodes, weights)
}

/// Gauss rule restricted to one knot span.
#[derive(Clone, Debug, PartialEq)]
pub struct SpanRule {
    pub a: f64,
    pub b: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureLayout {
    /// Greville abscissae of the B-spline basis.
    pub greville: Vec<f64>,
    pub spans: Vec<SpanRule>,
}

pub fn greville_and_quadrature(kv: &KnotVector, order: usize) -> QuadratureLayout {
    let p = kv.degree;
    let greville = (0..kv.len())
        .map(|i| kv.knots[i + 1..=i + p].iter().sum::<f64>() / p as f64)
        .collect();
    let (gn, gw) = gauss_legendre(order);
    let spans = kv
        .spans()
        .into_iter()
        .map(|(a, b)| SpanRule {
            a,
            b,
            nodes: gn.iter().map(|t| a + (b - a) * t).collect(),
            weights: gw.iter().map(|w| (b - a) * w).collect(),
        })
        .collect();
    QuadratureLayout { greville, spans }
}
