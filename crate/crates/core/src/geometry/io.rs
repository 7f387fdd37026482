//! JSON multi-patch files.
//!
//! ```json
//! { "patches": [ { "degree": [2, 2], "knots_u": [..], "knots_v": [..],
//!                  "cps": [[x, y], ..] } ],
//!   "interfaces": [ { "a": 0, "side_a": 1, "b": 1, "side_b": 0, "orient": 1 } ],
//!   "boundary": [ { "patch": 0, "side": 0 } ] }
//! ```
//!
//! Control points are listed with the first parameter direction varying
//! fastest. Sides are coded 0 = West, 1 = East, 2 = South, 3 = North.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::map::GeometryMap;
use super::multipatch::{MultiPatch, Side};
use super::GeometryError;
use crate::splines::KnotVector;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FilePatch {
    degree: [usize; 2],
    knots_u: Vec<f64>,
    knots_v: Vec<f64>,
    cps: Vec<[f64; 2]>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileInterface {
    a: usize,
    side_a: u8,
    b: usize,
    side_b: u8,
    orient: i8,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileBoundary {
    patch: usize,
    side: u8,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileMultiPatch {
    patches: Vec<FilePatch>,
    interfaces: Vec<FileInterface>,
    boundary: Vec<FileBoundary>,
}

fn field_err(field: String, message: impl ToString) -> GeometryError {
    GeometryError::Parse { line: None, field, message: message.to_string() }
}

fn side(code: u8, field: String) -> Result<Side, GeometryError> {
    Side::from_code(code).ok_or_else(|| field_err(field, format!("side code {code} is not in 0..=3")))
}

pub fn multipatch_from_json(text: &str) -> Result<MultiPatch, GeometryError> {
    let file: FileMultiPatch = serde_json::from_str(text).map_err(|e| GeometryError::Parse {
        line: Some((e.line(), e.column())),
        field: String::new(),
        message: e.to_string(),
    })?;
    let mut patches = Vec::with_capacity(file.patches.len());
    for (k, p) in file.patches.into_iter().enumerate() {
        let ku = KnotVector::new(p.degree[0], p.knots_u)
            .map_err(|e| field_err(format!("patches[{k}].knots_u"), e))?;
        let kv = KnotVector::new(p.degree[1], p.knots_v)
            .map_err(|e| field_err(format!("patches[{k}].knots_v"), e))?;
        let g = GeometryMap::new(ku, kv, p.cps).map_err(|e| field_err(format!("patches[{k}].cps"), e))?;
        patches.push(g);
    }
    let mut links = Vec::with_capacity(file.interfaces.len());
    for (i, f) in file.interfaces.iter().enumerate() {
        links.push((
            f.a,
            side(f.side_a, format!("interfaces[{i}].side_a"))?,
            f.b,
            side(f.side_b, format!("interfaces[{i}].side_b"))?,
            f.orient,
        ));
    }
    let mut boundary = Vec::with_capacity(file.boundary.len());
    for (i, b) in file.boundary.iter().enumerate() {
        boundary.push((b.patch, side(b.side, format!("boundary[{i}].side"))?));
    }
    MultiPatch::with_topology(patches, links, boundary)
}

pub fn multipatch_to_json(mp: &MultiPatch) -> String {
    let file = FileMultiPatch {
        patches: mp
            .patches
            .iter()
            .map(|g| FilePatch {
                degree: [g.knots_u().degree(), g.knots_v().degree()],
                knots_u: g.knots_u().knots().to_vec(),
                knots_v: g.knots_v().knots().to_vec(),
                cps: g.control_points().to_vec(),
            })
            .collect(),
        interfaces: mp
            .interfaces
            .iter()
            .map(|f| FileInterface {
                a: f.a,
                side_a: f.side_a.code(),
                b: f.b,
                side_b: f.side_b.code(),
                orient: f.orient,
            })
            .collect(),
        boundary: mp.boundary.iter().map(|&(patch, s)| FileBoundary { patch, side: s.code() }).collect(),
    };
    serde_json::to_string_pretty(&file).expect("plain data serializes")
}

pub fn load_multipatch(path: impl AsRef<Path>) -> Result<MultiPatch, GeometryError> {
    let text = std::fs::read_to_string(path)?;
    multipatch_from_json(&text)
}

pub fn save_multipatch(mp: &MultiPatch, path: impl AsRef<Path>) -> Result<(), GeometryError> {
    std::fs::write(path, multipatch_to_json(mp))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::domains::builtin_domain;

    const TWO_SQUARES: &str = r#"{
      "patches": [
        {"degree": [1, 1], "knots_u": [0, 0, 1, 1], "knots_v": [0, 0, 1, 1],
         "cps": [[0, 0], [1, 0], [0, 1], [1, 1]]},
        {"degree": [1, 1], "knots_u": [0, 0, 1, 1], "knots_v": [0, 0, 1, 1],
         "cps": [[1, 0], [2, 0], [1, 1], [2, 1]]}
      ],
      "interfaces": [{"a": 0, "side_a": 1, "b": 1, "side_b": 0, "orient": 1}],
      "boundary": [{"patch": 0, "side": 0}, {"patch": 0, "side": 2}, {"patch": 0, "side": 3},
                   {"patch": 1, "side": 1}, {"patch": 1, "side": 2}, {"patch": 1, "side": 3}]
    }"#;

    #[test]
    fn hand_written_two_squares() {
        let mp = multipatch_from_json(TWO_SQUARES).unwrap();
        assert_eq!(mp.interfaces.len(), 1);
        assert_eq!(mp.boundary.len(), 6);
    }

    #[test]
    fn annulus_round_trip_is_bitwise() {
        let mp = builtin_domain("quarter_annulus", 4).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("annulus.json");
        save_multipatch(&mp, &path).unwrap();
        let back = load_multipatch(&path).unwrap();
        assert_eq!(back.patches, mp.patches);
        assert_eq!(back.interfaces, mp.interfaces);
    }

    #[test]
    fn mismatched_interface_knots() {
        let bad = TWO_SQUARES.replace(
            r#""cps": [[1, 0], [2, 0], [1, 1], [2, 1]]"#,
            r#""cps": [[1, 0], [2, 0], [1, 0.5], [2, 0.5], [1, 1], [2, 1]]"#,
        );
        let at = bad.rfind(r#""knots_v": [0, 0, 1, 1]"#).unwrap();
        let bad = format!("{}{}{}", &bad[..at], r#""knots_v": [0, 0, 0.5, 1, 1]"#, &bad[at + 23..]);
        assert_ne!(bad, TWO_SQUARES);
        let err = multipatch_from_json(&bad).unwrap_err();
        assert!(matches!(err, GeometryError::NotMatching { .. }), "{err}");
    }

    #[test]
    fn syntax_error_reports_line() {
        let err = multipatch_from_json("{\n \"patches\": [,]}").unwrap_err();
        assert!(matches!(err, GeometryError::Parse { line: Some((2, _)), .. }));
    }

    #[test]
    fn bad_side_code_names_field() {
        let bad = TWO_SQUARES.replace(r#""side_b": 0"#, r#""side_b": 7"#);
        match multipatch_from_json(&bad).unwrap_err() {
            GeometryError::Parse { field, .. } => assert_eq!(field, "interfaces[0].side_b"),
            e => panic!("unexpected {e}"),
        }
    }
}
