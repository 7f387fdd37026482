//! Multi-patch topology: sides, interfaces, boundary and vertices.

use std::fmt;

use super::map::{eval_map, GeometryMap, Point};
use super::GeometryError;

/// Patch side. `West` is `x̂ = 0`, `East` is `x̂ = 1`, `South` is `ŷ = 0`,
/// `North` is `ŷ = 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    West = 0,
    East = 1,
    South = 2,
    North = 3,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::West, Side::East, Side::South, Side::North];

    pub fn from_code(code: u8) -> Option<Side> {
        Side::ALL.get(code as usize).copied()
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    /// Parameter direction that is constant on the side.
    pub fn normal_dir(self) -> usize {
        match self {
            Side::West | Side::East => 0,
            Side::South | Side::North => 1,
        }
    }

    /// Parameter direction running along the side.
    pub fn along_dir(self) -> usize {
        1 - self.normal_dir()
    }

    /// Whether the side sits at parameter value 1.
    pub fn is_far(self) -> bool {
        matches!(self, Side::East | Side::North)
    }

    /// Parameter point at position `t` along the side.
    pub fn param(self, t: f64) -> (f64, f64) {
        match self {
            Side::West => (0.0, t),
            Side::East => (1.0, t),
            Side::South => (t, 0.0),
            Side::North => (t, 1.0),
        }
    }

    /// Corners at `t = 0` and `t = 1`.
    pub fn corners(self) -> [Corner; 2] {
        match self {
            Side::West => [Corner(0), Corner(2)],
            Side::East => [Corner(1), Corner(3)],
            Side::South => [Corner(0), Corner(1)],
            Side::North => [Corner(2), Corner(3)],
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Patch corner: bit 0 set means `x̂ = 1`, bit 1 set means `ŷ = 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Corner(pub u8);

impl Corner {
    pub const ALL: [Corner; 4] = [Corner(0), Corner(1), Corner(2), Corner(3)];

    /// Whether the corner sits at parameter value 1 in direction `dir`.
    pub fn is_far(self, dir: usize) -> bool {
        (self.0 >> dir) & 1 == 1
    }

    /// The two sides meeting at this corner, `[x̂-side, ŷ-side]`.
    pub fn sides(self) -> [Side; 2] {
        [
            if self.is_far(0) { Side::East } else { Side::West },
            if self.is_far(1) { Side::North } else { Side::South },
        ]
    }

    pub fn param(self) -> (f64, f64) {
        (self.is_far(0) as u8 as f64, self.is_far(1) as u8 as f64)
    }
}

/// Two patch sides glued together. With `orient = 1` the along-side
/// parameters run the same way, with `-1` they are reversed. `alpha` is the
/// fitted ratio in `∂_in G_a = −α ∂_in G_b` between the inward transversal
/// derivatives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interface {
    pub a: usize,
    pub side_a: Side,
    pub b: usize,
    pub side_b: Side,
    pub orient: i8,
    pub alpha: f64,
}

impl Interface {
    /// Along-side parameter on `b` matching `t` on `a`.
    pub fn map_t(&self, t: f64) -> f64 {
        if self.orient > 0 {
            t
        } else {
            1.0 - t
        }
    }
}

/// Cross point with the incident patch corners.
#[derive(Clone, Debug, PartialEq)]
pub struct Vertex {
    pub corners: Vec<(usize, Corner)>,
    pub on_boundary: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct C1Report {
    pub value_match: bool,
    pub deriv_match: bool,
    pub alpha: f64,
    pub max_value_gap: f64,
    pub max_deriv_residual: f64,
}

#[derive(Clone, Debug)]
pub struct MultiPatch {
    pub patches: Vec<GeometryMap>,
    pub interfaces: Vec<Interface>,
    pub boundary: Vec<(usize, Side)>,
    pub vertices: Vec<Vertex>,
}

const SAMPLES: usize = 50;
const VALUE_TOL: f64 = 1e-8;
const DERIV_TOL: f64 = 1e-8;

fn dist(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn side_point(g: &GeometryMap, s: Side, t: f64) -> Point {
    let (u, v) = s.param(t);
    g.point(u, v)
}

/// Inward transversal parametric derivative of `g` on side `s`.
fn inward_derivative(g: &GeometryMap, s: Side, t: f64) -> Result<Point, GeometryError> {
    let (u, v) = s.param(t);
    let e = eval_map(g, u, v, 1)?;
    let d = s.normal_dir();
    let sign = if s.is_far() { -1.0 } else { 1.0 };
    Ok([sign * e.jac[0][d], sign * e.jac[1][d]])
}

/// Samples the interface trace and fits the transversal-derivative ratio.
pub fn check_c1_matching(mp: &MultiPatch, iface: &Interface) -> Result<C1Report, GeometryError> {
    check_pair(&mp.patches[iface.a], iface.side_a, &mp.patches[iface.b], iface.side_b, iface.orient)
}

fn check_pair(
    ga: &GeometryMap,
    sa: Side,
    gb: &GeometryMap,
    sb: Side,
    orient: i8,
) -> Result<C1Report, GeometryError> {
    let h = ga.diameter().max(gb.diameter());
    let ts: Vec<f64> = (0..SAMPLES).map(|k| k as f64 / (SAMPLES - 1) as f64).collect();
    let tb = |t: f64| if orient > 0 { t } else { 1.0 - t };
    let mut max_gap = 0.0f64;
    let mut ia = Vec::with_capacity(SAMPLES);
    let mut ib = Vec::with_capacity(SAMPLES);
    for &t in &ts {
        max_gap = max_gap.max(dist(side_point(ga, sa, t), side_point(gb, sb, tb(t))));
        ia.push(inward_derivative(ga, sa, t)?);
        ib.push(inward_derivative(gb, sb, tb(t))?);
    }
    let num: f64 = ia.iter().zip(&ib).map(|(a, b)| a[0] * b[0] + a[1] * b[1]).sum();
    let den: f64 = ib.iter().map(|b| b[0] * b[0] + b[1] * b[1]).sum();
    let alpha = -num / den;
    // Plain C¹ matches should couple with integer coefficients.
    let alpha = if (alpha - 1.0).abs() <= 1e-10 { 1.0 } else { alpha };
    let scale = ia.iter().map(|a| a[0].hypot(a[1])).fold(0.0, f64::max);
    let max_res = ia
        .iter()
        .zip(&ib)
        .map(|(a, b)| (a[0] + alpha * b[0]).hypot(a[1] + alpha * b[1]))
        .fold(0.0, f64::max);
    Ok(C1Report {
        value_match: max_gap <= VALUE_TOL * h,
        deriv_match: alpha > 0.0 && max_res <= DERIV_TOL * scale,
        alpha,
        max_value_gap: max_gap,
        max_deriv_residual: max_res,
    })
}

impl MultiPatch {
    /// Detects interfaces by matching side end points and traces; every
    /// unmatched side becomes boundary.
    pub fn from_patches(patches: Vec<GeometryMap>) -> Result<Self, GeometryError> {
        let mut sides: Vec<(usize, Side)> = Vec::new();
        for k in 0..patches.len() {
            sides.extend(Side::ALL.iter().map(|&s| (k, s)));
        }
        let ends: Vec<[Point; 2]> = sides
            .iter()
            .map(|&(k, s)| [side_point(&patches[k], s, 0.0), side_point(&patches[k], s, 1.0)])
            .collect();
        let mid: Vec<Point> = sides.iter().map(|&(k, s)| side_point(&patches[k], s, 0.5)).collect();
        let mut used = vec![false; sides.len()];
        let mut links = Vec::new();
        for i in 0..sides.len() {
            if used[i] {
                continue;
            }
            for j in (i + 1)..sides.len() {
                if used[j] || sides[i].0 == sides[j].0 {
                    continue;
                }
                let h = patches[sides[i].0].diameter().max(patches[sides[j].0].diameter());
                let tol = 1e-8 * h;
                let orient = if dist(ends[i][0], ends[j][0]) <= tol && dist(ends[i][1], ends[j][1]) <= tol {
                    1
                } else if dist(ends[i][0], ends[j][1]) <= tol && dist(ends[i][1], ends[j][0]) <= tol {
                    -1
                } else {
                    continue;
                };
                if dist(mid[i], mid[j]) > tol {
                    continue;
                }
                used[i] = true;
                used[j] = true;
                links.push((sides[i].0, sides[i].1, sides[j].0, sides[j].1, orient));
                break;
            }
        }
        let boundary = sides.iter().zip(&used).filter(|(_, &u)| !u).map(|(&s, _)| s).collect();
        Self::with_topology(patches, links, boundary)
    }

    /// Builds a multi-patch from explicit topology, validating knot matching,
    /// trace matching and C¹ matching of every interface.
    pub fn with_topology(
        patches: Vec<GeometryMap>,
        links: Vec<(usize, Side, usize, Side, i8)>,
        boundary: Vec<(usize, Side)>,
    ) -> Result<Self, GeometryError> {
        let k = patches.len();
        if k == 0 {
            return Err(GeometryError::Topology("no patches".into()));
        }
        let mut seen = vec![[0u8; 4]; k];
        let mut mark = |p: usize, s: Side| -> Result<(), GeometryError> {
            if p >= k {
                return Err(GeometryError::Topology(format!("patch index {p} out of range")));
            }
            seen[p][s as usize] += 1;
            Ok(())
        };
        for &(a, sa, b, sb, _) in &links {
            mark(a, sa)?;
            mark(b, sb)?;
        }
        for &(p, s) in &boundary {
            mark(p, s)?;
        }
        for (p, counts) in seen.iter().enumerate() {
            for s in Side::ALL {
                if counts[s as usize] != 1 {
                    return Err(GeometryError::Topology(format!(
                        "side {s} of patch {p} is referenced {} times",
                        counts[s as usize]
                    )));
                }
            }
        }

        let mut interfaces = Vec::with_capacity(links.len());
        for (a, sa, b, sb, orient) in links {
            if a == b {
                return Err(GeometryError::Topology(format!("patch {a} is glued to itself")));
            }
            if orient != 1 && orient != -1 {
                return Err(GeometryError::Topology(format!("orientation {orient} is not +1 or -1")));
            }
            let ka = patches[a].knots(sa.along_dir());
            let kb = patches[b].knots(sb.along_dir());
            let kb_knots: Vec<f64> = if orient > 0 {
                kb.knots().to_vec()
            } else {
                kb.knots().iter().rev().map(|t| 1.0 - t).collect()
            };
            let same = ka.degree() == kb.degree()
                && ka.knots().len() == kb_knots.len()
                && ka.knots().iter().zip(&kb_knots).all(|(x, y)| (x - y).abs() <= 1e-12);
            if !same {
                return Err(GeometryError::NotMatching {
                    a,
                    b,
                    reason: "knot vectors along the interface differ".into(),
                });
            }
            let rep = check_pair(&patches[a], sa, &patches[b], sb, orient)?;
            if !rep.value_match {
                return Err(GeometryError::NotMatching {
                    a,
                    b,
                    reason: format!("traces differ by {:e}", rep.max_value_gap),
                });
            }
            if !rep.deriv_match {
                return Err(GeometryError::NotC1 { a, b, residual: rep.max_deriv_residual, alpha: rep.alpha });
            }
            interfaces.push(Interface { a, side_a: sa, b, side_b: sb, orient, alpha: rep.alpha });
        }

        let vertices = build_vertices(k, &interfaces, &boundary);
        let mp = MultiPatch { patches, interfaces, boundary, vertices };
        for (i, v) in mp.vertices.iter().enumerate() {
            if !v.on_boundary && v.corners.len() != 4 {
                return Err(GeometryError::Topology(format!(
                    "interior vertex {i} has valence {}; only valence 4 is supported",
                    v.corners.len()
                )));
            }
        }
        Ok(mp)
    }

    pub fn num_patches(&self) -> usize {
        self.patches.len()
    }

    pub fn is_boundary(&self, patch: usize, side: Side) -> bool {
        self.boundary.contains(&(patch, side))
    }

    /// Interface attached to `(patch, side)` if any.
    pub fn interface_at(&self, patch: usize, side: Side) -> Option<(usize, &Interface)> {
        self.interfaces
            .iter()
            .enumerate()
            .find(|(_, f)| (f.a == patch && f.side_a == side) || (f.b == patch && f.side_b == side))
    }

    /// Vertex index containing `(patch, corner)`.
    pub fn vertex_of(&self, patch: usize, corner: Corner) -> usize {
        self.vertices
            .iter()
            .position(|v| v.corners.contains(&(patch, corner)))
            .expect("every corner belongs to a vertex")
    }

    /// `V − E + F` of the patch complex.
    pub fn euler_characteristic(&self) -> i64 {
        let e = self.interfaces.len() + self.boundary.len();
        self.vertices.len() as i64 - e as i64 + self.patches.len() as i64
    }

    /// `|det J|` has one sign per patch over a sample grid.
    pub fn check_jacobians(&self, samples: usize) -> Result<(), GeometryError> {
        for g in &self.patches {
            let mut sign = 0.0f64;
            for i in 0..samples {
                for j in 0..samples {
                    let u = (i as f64 + 0.5) / samples as f64;
                    let v = (j as f64 + 0.5) / samples as f64;
                    let d = eval_map(g, u, v, 1)?.det();
                    if sign == 0.0 {
                        sign = d.signum();
                    } else if d.signum() != sign {
                        return Err(GeometryError::DegenerateJacobian { u, v, det: d });
                    }
                }
            }
        }
        Ok(())
    }
}

fn build_vertices(k: usize, interfaces: &[Interface], boundary: &[(usize, Side)]) -> Vec<Vertex> {
    let id = |p: usize, c: Corner| 4 * p + c.0 as usize;
    let mut parent: Vec<usize> = (0..4 * k).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for f in interfaces {
        let ca = f.side_a.corners();
        let mut cb = f.side_b.corners();
        if f.orient < 0 {
            cb.swap(0, 1);
        }
        for e in 0..2 {
            let ra = find(&mut parent, id(f.a, ca[e]));
            let rb = find(&mut parent, id(f.b, cb[e]));
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    let mut groups: Vec<(usize, Vec<(usize, Corner)>)> = Vec::new();
    for p in 0..k {
        for c in Corner::ALL {
            let r = find(&mut parent, id(p, c));
            match groups.iter_mut().find(|(root, _)| *root == r) {
                Some((_, list)) => list.push((p, c)),
                None => groups.push((r, vec![(p, c)])),
            }
        }
    }
    groups
        .into_iter()
        .map(|(_, corners)| {
            let on_boundary = corners
                .iter()
                .any(|&(p, c)| c.sides().iter().any(|s| boundary.contains(&(p, *s))));
            Vertex { corners, on_boundary }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::domains::{builtin_domain, two_squares};
    use crate::geometry::map::split_patch;

    #[test]
    fn two_squares_topology() {
        let mp = two_squares();
        assert_eq!(mp.interfaces.len(), 1);
        assert_eq!(mp.boundary.len(), 6);
        let f = mp.interfaces[0];
        let rep = check_c1_matching(&mp, &f).unwrap();
        assert!(rep.value_match && rep.deriv_match);
        assert!((rep.alpha - 1.0).abs() < 1e-12);
        assert_eq!(mp.vertices.len(), 6);
        assert!(mp.vertices.iter().all(|v| v.on_boundary));
        assert_eq!(mp.euler_characteristic(), 1);
    }

    #[test]
    fn stretched_neighbour_has_alpha_two() {
        let a = GeometryMap::rectangle(0.0, 1.0, 0.0, 1.0);
        let b = GeometryMap::rectangle(1.0, 1.5, 0.0, 1.0);
        let mp = MultiPatch::from_patches(vec![a, b]).unwrap();
        assert!((mp.interfaces[0].alpha - 2.0).abs() < 1e-12);
    }

    #[test]
    fn kinked_interface_is_not_c1() {
        let a = GeometryMap::rectangle(0.0, 1.0, 0.0, 1.0);
        let k = crate::splines::KnotVector::bezier(1);
        // Sheared neighbour: transversal derivative not parallel.
        let b = GeometryMap::new(k.clone(), k, vec![[1.0, 0.0], [2.0, 0.5], [1.0, 1.0], [2.0, 1.5]]).unwrap();
        assert!(matches!(MultiPatch::from_patches(vec![a, b]), Err(GeometryError::NotC1 { .. })));
    }

    #[test]
    fn reversed_orientation_detected() {
        let a = GeometryMap::rectangle(0.0, 1.0, 0.0, 1.0);
        // Second square parameterized with ŷ running downwards.
        let b = GeometryMap::rectangle(1.0, 2.0, 1.0, 0.0);
        let mp = MultiPatch::from_patches(vec![a, b]).unwrap();
        assert_eq!(mp.interfaces[0].orient, -1);
        assert!((mp.interfaces[0].alpha - 1.0).abs() < 1e-12);
    }

    #[test]
    fn annulus_grid_counts() {
        let mp = builtin_domain("quarter_annulus", 4).unwrap();
        assert_eq!(mp.patches.len(), 16);
        assert_eq!(mp.interfaces.len(), 24);
        assert_eq!(mp.boundary.len(), 16);
        assert_eq!(mp.vertices.iter().filter(|v| !v.on_boundary).count(), 9);
        for f in &mp.interfaces {
            let rep = check_c1_matching(&mp, f).unwrap();
            assert!(rep.value_match && rep.deriv_match && (rep.alpha - 1.0).abs() < 1e-10);
        }
        mp.check_jacobians(6).unwrap();
    }

    #[test]
    fn annulus_two_by_two_alpha_one() {
        let mp = MultiPatch::from_patches(split_patch(&crate::geometry::domains::annulus_base(), 2, 2)).unwrap();
        assert_eq!(mp.interfaces.len(), 4);
        assert!(mp.interfaces.iter().all(|f| (f.alpha - 1.0).abs() < 1e-10));
    }

    #[test]
    fn lamella_has_one_hole() {
        let mp = builtin_domain("lamella", 2).unwrap();
        assert_eq!(mp.patches.len(), 32);
        assert_eq!(mp.euler_characteristic(), 0);
        assert_eq!(mp.vertices.iter().filter(|v| !v.on_boundary).count(), 16);
        assert!(mp.interfaces.iter().all(|f| (f.alpha - 1.0).abs() < 1e-10));
        mp.check_jacobians(6).unwrap();
    }
}
