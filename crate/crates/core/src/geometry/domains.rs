//! Built-in computational domains.
//!
//! * `unit_square`: `[0,1]²` split into `s × s` patches.
//! * `quarter_annulus`: radii 1 and 2 in the first quadrant, the arc being the
//!   polynomial quadratic through `(1,0)`, `(1,1)`, `(0,1)`; split `s × s`.
//! * `lamella`: a D-shaped plate with a D-shaped hole made of 8 quadratic
//!   patches, each split `s × s`.
//! * `two_squares`: `[0,2] × [0,1]` as two unit squares.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::map::{split_patch, GeometryMap, Point};
use super::multipatch::MultiPatch;
use super::GeometryError;
use crate::splines::KnotVector;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainName {
    UnitSquare,
    QuarterAnnulus,
    Lamella,
    TwoSquares,
}

impl DomainName {
    pub const ALL: [DomainName; 4] =
        [DomainName::UnitSquare, DomainName::QuarterAnnulus, DomainName::Lamella, DomainName::TwoSquares];

    pub fn as_str(self) -> &'static str {
        match self {
            DomainName::UnitSquare => "unit_square",
            DomainName::QuarterAnnulus => "quarter_annulus",
            DomainName::Lamella => "lamella",
            DomainName::TwoSquares => "two_squares",
        }
    }

    /// Split count used when none is given.
    pub fn default_splits(self) -> usize {
        match self {
            DomainName::UnitSquare => 2,
            DomainName::QuarterAnnulus => 4,
            DomainName::Lamella => 2,
            DomainName::TwoSquares => 1,
        }
    }
}

impl fmt::Display for DomainName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DomainName {
    type Err = GeometryError;
    fn from_str(s: &str) -> Result<Self, GeometryError> {
        DomainName::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| GeometryError::UnknownDomain(s.to_string()))
    }
}

pub fn builtin_domain(name: &str, splits: usize) -> Result<MultiPatch, GeometryError> {
    build(name.parse()?, splits)
}

pub fn build(name: DomainName, splits: usize) -> Result<MultiPatch, GeometryError> {
    if splits == 0 {
        return Err(GeometryError::Invalid("splits must be at least 1".into()));
    }
    let bases = match name {
        DomainName::UnitSquare => vec![GeometryMap::rectangle(0.0, 1.0, 0.0, 1.0)],
        DomainName::QuarterAnnulus => vec![annulus_base()],
        DomainName::Lamella => lamella_base(),
        DomainName::TwoSquares => return Ok(two_squares()),
    };
    let patches = bases.iter().flat_map(|g| split_patch(g, splits, splits)).collect();
    MultiPatch::from_patches(patches)
}

pub fn two_squares() -> MultiPatch {
    let parts = split_patch(&GeometryMap::rectangle(0.0, 2.0, 0.0, 1.0), 2, 1);
    MultiPatch::from_patches(parts).expect("two squares form a valid multi-patch")
}

const GREVILLE: [f64; 4] = [0.0, 0.25, 0.75, 1.0];

fn quad_knots() -> KnotVector {
    KnotVector::new(2, vec![0.0, 0.0, 0.0, 0.5, 1.0, 1.0, 1.0]).expect("valid knots")
}

/// Patch of degree 2 on `(0,0,0,½,1,1,1)²` with control point `f(g_i, j)`,
/// `g_i` being the Greville abscissa of index `i` in the first direction.
fn quad_patch(f: impl Fn(f64, usize) -> Point) -> GeometryMap {
    let mut cps = Vec::with_capacity(16);
    for j in 0..4 {
        for &g in &GREVILLE {
            cps.push(f(g, j));
        }
    }
    GeometryMap::new(quad_knots(), quad_knots(), cps).expect("16 control points")
}

/// Quarter annulus with the radial direction first and the angular second.
pub fn annulus_base() -> GeometryMap {
    let arc = [[1.0, 0.0], [1.0, 0.5], [0.5, 1.0], [0.0, 1.0]];
    quad_patch(|g, j| [(1.0 + g) * arc[j][0], (1.0 + g) * arc[j][1]])
}

fn lamella_base() -> Vec<GeometryMap> {
    let arc_top = [[1.0, 0.0], [1.0, 0.5], [0.5, 1.0], [0.0, 1.0]];
    let arc_bot = [[0.0, -1.0], [0.5, -1.0], [1.0, -0.5], [1.0, 0.0]];
    let top_right = quad_patch(|g, j| [1.0 + (1.0 + g) * arc_top[j][0], 2.0 + (1.0 + g) * arc_top[j][1]]);
    let bottom_right = quad_patch(|g, j| [1.0 + (1.0 + g) * arc_bot[j][0], -2.0 + (1.0 + g) * arc_bot[j][1]]);
    let right = quad_patch(|g, j| {
        let y = [-2.0, -2.0 + 0.5 * (1.0 + g), 2.0 - 0.5 * (1.0 + g), 2.0];
        [2.0 + g, y[j]]
    });
    let strip_x = |g: f64, j: usize| [1.0, 1.0 - 0.5 * (1.0 + g), -0.75, -1.0][j];
    let top = quad_patch(|g, j| [strip_x(g, j), 3.0 + g]);
    let bottom = quad_patch(|g, j| [strip_x(g, j), -3.0 - g]);
    let top_left = quad_patch(|g, j| [-1.0 - g, 3.0 + GREVILLE[j]]);
    let bottom_left = quad_patch(|g, j| [-1.0 - g, -3.0 - GREVILLE[j]]);
    let left = quad_patch(|g, j| [-1.0 - g, [3.0, 2.75, -2.75, -3.0][j]]);
    vec![top_right, right, bottom_right, bottom, bottom_left, left, top_left, top]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for d in DomainName::ALL {
            assert_eq!(d.as_str().parse::<DomainName>().unwrap(), d);
        }
        assert!(matches!(builtin_domain("torus", 1), Err(GeometryError::UnknownDomain(_))));
    }

    #[test]
    fn unit_square_patch_count() {
        assert_eq!(builtin_domain("unit_square", 2).unwrap().patches.len(), 4);
    }

    #[test]
    fn annulus_base_knots() {
        let g = annulus_base();
        assert_eq!(g.knots_u().knots(), &[0.0, 0.0, 0.0, 0.5, 1.0, 1.0, 1.0]);
        assert_eq!(g.knots_v().knots(), &[0.0, 0.0, 0.0, 0.5, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn lamella_base_is_a_ring() {
        let mp = MultiPatch::from_patches(lamella_base()).unwrap();
        assert_eq!(mp.interfaces.len(), 8);
        assert_eq!(mp.boundary.len(), 16);
        assert_eq!(mp.vertices.len(), 16);
        assert_eq!(mp.euler_characteristic(), 0);
    }
}
