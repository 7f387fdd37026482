//! Patch maps, multi-patch topology and built-in domains.

pub mod domains;
mod io;
mod map;
mod multipatch;

pub use domains::{builtin_domain, two_squares, DomainName};
pub use io::{load_multipatch, multipatch_from_json, multipatch_to_json, save_multipatch};
pub use map::{eval_map, split_patch, GeometryMap, MapEval, Point};
pub use multipatch::{check_c1_matching, C1Report, Corner, Interface, MultiPatch, Side, Vertex};

use thiserror::Error;

use crate::splines::SplineError;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("degenerate Jacobian at ({u}, {v}): det = {det:e}")]
    DegenerateJacobian { u: f64, v: f64, det: f64 },
    #[error("patches {a} and {b} do not match: {reason}")]
    NotMatching { a: usize, b: usize, reason: String },
    #[error("interface between patches {a} and {b} is not C1-matching (alpha {alpha}, residual {residual:e})")]
    NotC1 { a: usize, b: usize, residual: f64, alpha: f64 },
    #[error("topology error: {0}")]
    Topology(String),
    #[error("invalid geometry: {0}")]
    Invalid(String),
    #[error("unknown domain '{0}' (expected unit_square, quarter_annulus, lamella or two_squares)")]
    UnknownDomain(String),
    #[error("parse error{}{}: {message}",
        line.map(|(l, c)| format!(" at line {l}, column {c}")).unwrap_or_default(),
        if field.is_empty() { String::new() } else { format!(" in {field}") })]
    Parse { line: Option<(usize, usize)>, field: String, message: String },
    #[error(transparent)]
    Spline(#[from] SplineError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
