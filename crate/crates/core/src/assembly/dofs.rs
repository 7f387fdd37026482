//! Degree-of-freedom classes, primal numbering and Lagrange multipliers.
//!
//! In the transformed basis the two outer layers along a side carry the trace
//! and the inward normal derivative. Along a clamped side both layers vanish.
//! Along an interface the layers pair up with the neighbour: values by
//! `u_a − u_b = 0` and inward derivatives by `u_a + α u_b = 0`. The 2×2
//! corner blocks are either eliminated (boundary vertex) or primal.

use std::collections::{HashMap, VecDeque};

use crate::error::{Error, Result};
use crate::geometry::{Corner, MultiPatch, Side};
use crate::splines::TensorBasis2D;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DofClass {
    Interior,
    InterfaceValue,
    InterfaceDerivative,
    Primal,
    Eliminated,
}

/// Classification of one patch. Index lists other than `free` hold positions
/// in the free numbering.
#[derive(Clone, Debug, PartialEq)]
pub struct PatchDofs {
    pub dims: (usize, usize),
    pub class: Vec<DofClass>,
    /// Tensor indices of the non-eliminated dofs, ascending.
    pub free: Vec<usize>,
    /// Tensor index to free position, `usize::MAX` when eliminated.
    pub free_pos: Vec<usize>,
    pub interior: Vec<usize>,
    pub value: Vec<usize>,
    pub deriv: Vec<usize>,
    pub primal: Vec<usize>,
    /// Global primal index and factor for each entry of `primal`.
    pub primal_global: Vec<(usize, f64)>,
}

impl PatchDofs {
    pub fn n_free(&self) -> usize {
        self.free.len()
    }

    /// `Γ = V ∪ D`, ascending.
    pub fn gamma(&self) -> Vec<usize> {
        sorted_union(&[&self.value, &self.deriv])
    }

    /// `Δ = I ∪ Γ`, ascending.
    pub fn delta(&self) -> Vec<usize> {
        sorted_union(&[&self.interior, &self.value, &self.deriv])
    }

    pub fn count(&self, c: DofClass) -> usize {
        self.class.iter().filter(|&&x| x == c).count()
    }
}

fn sorted_union(parts: &[&Vec<usize>]) -> Vec<usize> {
    let mut v: Vec<usize> = parts.iter().flat_map(|p| p.iter().copied()).collect();
    v.sort_unstable();
    v
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerKind {
    Value,
    Derivative,
}

/// One constraint row `Σ coeff · u[patch][tensor] = 0` over two dofs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Multiplier {
    pub kind: LayerKind,
    pub interface: usize,
    pub entries: [(usize, usize, f64); 2],
}

#[derive(Clone, Debug, PartialEq)]
pub struct DofTable {
    pub patches: Vec<PatchDofs>,
    pub n_primal: usize,
    /// Vertex index of each primal block of four.
    pub primal_vertices: Vec<usize>,
    pub multipliers: Vec<Multiplier>,
}

impl DofTable {
    pub fn n_lambda(&self) -> usize {
        self.multipliers.len()
    }

    pub fn total_free(&self) -> usize {
        self.patches.iter().map(PatchDofs::n_free).sum()
    }
}

/// Tensor index of the dof at `layer` from side `s`, position `t` along it.
pub fn side_dof(dims: (usize, usize), s: Side, layer: usize, t: usize) -> usize {
    let (nx, ny) = dims;
    let (i, j) = match s {
        Side::West => (layer, t),
        Side::East => (nx - 1 - layer, t),
        Side::South => (t, layer),
        Side::North => (t, ny - 1 - layer),
    };
    i + nx * j
}

/// Tensor index of corner-block entry `(a, b)`: `a` steps inward in `x̂`,
/// `b` in `ŷ`.
pub fn corner_dof(dims: (usize, usize), c: Corner, a: usize, b: usize) -> usize {
    let (nx, ny) = dims;
    let i = if c.is_far(0) { nx - 1 - a } else { a };
    let j = if c.is_far(1) { ny - 1 - b } else { b };
    i + nx * j
}

/// Maps local jet component `a + 2b` to `(global component, factor)`.
type JetMap = [(usize, f64); 4];

const IDENTITY_JET: JetMap = [(0, 1.0), (1, 1.0), (2, 1.0), (3, 1.0)];

fn transfer(from: &JetMap, side_from: Side, side_to: Side, trans_factor: f64) -> JetMap {
    let mut out = [(0usize, 0.0f64); 4];
    for (q, slot) in out.iter_mut().enumerate() {
        let (qa, qb) = (q % 2, q / 2);
        let (along, trans) = if side_to.along_dir() == 0 { (qa, qb) } else { (qb, qa) };
        let p = if side_from.along_dir() == 0 { along + 2 * trans } else { trans + 2 * along };
        let f = if trans == 1 { trans_factor } else { 1.0 };
        *slot = (from[p].0, from[p].1 * f);
    }
    out
}

fn jets_equal(a: &JetMap, b: &JetMap) -> bool {
    a.iter().zip(b).all(|(x, y)| x.0 == y.0 && (x.1 - y.1).abs() <= 1e-12 * x.1.abs().max(1.0))
}

/// Propagates the reference jet around an interior vertex.
fn vertex_jets(mp: &MultiPatch, vertex: usize) -> Result<HashMap<(usize, Corner), JetMap>> {
    let v = &mp.vertices[vertex];
    let start = *v.corners.iter().min().expect("vertex has corners");
    let mut jets = HashMap::new();
    jets.insert(start, IDENTITY_JET);
    let mut queue = VecDeque::from([start]);
    while let Some((p, c)) = queue.pop_front() {
        let jp = jets[&(p, c)];
        for s in c.sides() {
            let Some((_, f)) = mp.interface_at(p, s) else { continue };
            let (q, sq, t) = if f.a == p && f.side_a == s {
                (f.b, f.side_b, -1.0 / f.alpha)
            } else {
                (f.a, f.side_a, -f.alpha)
            };
            let e = s.corners().iter().position(|&x| x == c).expect("corner lies on side");
            let d = sq.corners()[if f.orient > 0 { e } else { 1 - e }];
            let jq = transfer(&jp, s, sq, t);
            match jets.get(&(q, d)) {
                Some(existing) => {
                    if !jets_equal(existing, &jq) {
                        return Err(Error::Topology(format!(
                            "inconsistent primal signs around vertex {vertex}"
                        )));
                    }
                }
                None => {
                    jets.insert((q, d), jq);
                    queue.push_back((q, d));
                }
            }
        }
    }
    if jets.len() != v.corners.len() {
        return Err(Error::Topology(format!("vertex {vertex} is not connected through interfaces")));
    }
    Ok(jets)
}

pub fn classify_dofs(mp: &MultiPatch, bases: &[TensorBasis2D]) -> Result<DofTable> {
    if bases.len() != mp.num_patches() {
        return Err(Error::InvalidConfig(format!(
            "{} bases for {} patches",
            bases.len(),
            mp.num_patches()
        )));
    }

    let mut primal_vertices = Vec::new();
    let mut vertex_block = vec![usize::MAX; mp.vertices.len()];
    let mut jets: HashMap<(usize, Corner), JetMap> = HashMap::new();
    for (vi, v) in mp.vertices.iter().enumerate() {
        if v.on_boundary {
            continue;
        }
        vertex_block[vi] = primal_vertices.len();
        primal_vertices.push(vi);
        jets.extend(vertex_jets(mp, vi)?);
    }

    let mut patches = Vec::with_capacity(mp.num_patches());
    for (k, tb) in bases.iter().enumerate() {
        let dims = tb.dims();
        let (nx, ny) = dims;
        let clamped: Vec<Side> = Side::ALL.into_iter().filter(|&s| mp.is_boundary(k, s)).collect();
        let corner_vertex: Vec<usize> = Corner::ALL.iter().map(|&c| mp.vertex_of(k, c)).collect();
        let mut class = vec![DofClass::Interior; nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                let dist = [i, nx - 1 - i, j, ny - 1 - j];
                let near = |s: Side| dist[s as usize] <= 1;
                let corner = Corner::ALL.into_iter().find(|c| c.sides().iter().all(|&s| near(s)));
                class[i + nx * j] = if clamped.iter().any(|&s| near(s)) {
                    DofClass::Eliminated
                } else if let Some(c) = corner {
                    if mp.vertices[corner_vertex[c.0 as usize]].on_boundary {
                        DofClass::Eliminated
                    } else {
                        DofClass::Primal
                    }
                } else if let Some(s) = Side::ALL.into_iter().find(|&s| near(s)) {
                    if dist[s as usize] == 0 {
                        DofClass::InterfaceValue
                    } else {
                        DofClass::InterfaceDerivative
                    }
                } else {
                    DofClass::Interior
                };
            }
        }

        let free: Vec<usize> = (0..nx * ny).filter(|&t| class[t] != DofClass::Eliminated).collect();
        let mut free_pos = vec![usize::MAX; nx * ny];
        for (pos, &t) in free.iter().enumerate() {
            free_pos[t] = pos;
        }
        let by_class = |c: DofClass| -> Vec<usize> {
            free.iter().enumerate().filter(|(_, &t)| class[t] == c).map(|(p, _)| p).collect()
        };
        let interior = by_class(DofClass::Interior);
        let value = by_class(DofClass::InterfaceValue);
        let deriv = by_class(DofClass::InterfaceDerivative);

        let mut primal_pairs: Vec<(usize, (usize, f64))> = Vec::new();
        for c in Corner::ALL {
            let vi = corner_vertex[c.0 as usize];
            if mp.vertices[vi].on_boundary {
                continue;
            }
            let jet = jets[&(k, c)];
            let base = 4 * vertex_block[vi];
            for (comp, &(g, f)) in jet.iter().enumerate() {
                let t = corner_dof(dims, c, comp % 2, comp / 2);
                debug_assert_eq!(class[t], DofClass::Primal);
                primal_pairs.push((free_pos[t], (base + g, f)));
            }
        }
        primal_pairs.sort_by_key(|e| e.0);
        let primal = primal_pairs.iter().map(|e| e.0).collect();
        let primal_global = primal_pairs.iter().map(|e| e.1).collect();

        patches.push(PatchDofs { dims, class, free, free_pos, interior, value, deriv, primal, primal_global });
    }

    let mut multipliers = Vec::new();
    for (fi, f) in mp.interfaces.iter().enumerate() {
        let da = patches[f.a].dims;
        let db = patches[f.b].dims;
        let len_a = if f.side_a.along_dir() == 0 { da.0 } else { da.1 };
        let len_b = if f.side_b.along_dir() == 0 { db.0 } else { db.1 };
        if len_a != len_b {
            return Err(Error::Topology(format!(
                "interface {fi}: {len_a} dofs along patch {} but {len_b} along patch {}",
                f.a, f.b
            )));
        }
        for (layer, kind, coeff_b) in
            [(0, LayerKind::Value, -1.0), (1, LayerKind::Derivative, f.alpha)]
        {
            let expect = if layer == 0 { DofClass::InterfaceValue } else { DofClass::InterfaceDerivative };
            for t in 2..len_a.saturating_sub(2) {
                let tb = if f.orient > 0 { t } else { len_a - 1 - t };
                let ia = side_dof(da, f.side_a, layer, t);
                let ib = side_dof(db, f.side_b, layer, tb);
                if patches[f.a].class[ia] != expect || patches[f.b].class[ib] != expect {
                    return Err(Error::Topology(format!(
                        "interface {fi}: dof {ia} of patch {} or {ib} of patch {} has no partner",
                        f.a, f.b
                    )));
                }
                multipliers.push(Multiplier {
                    kind,
                    interface: fi,
                    entries: [(f.a, ia, 1.0), (f.b, ib, coeff_b)],
                });
            }
        }
    }

    // Every V/D dof must be covered exactly once.
    let mut hits: Vec<Vec<u8>> = patches.iter().map(|p| vec![0u8; p.class.len()]).collect();
    for m in &multipliers {
        for &(p, t, _) in &m.entries {
            hits[p][t] += 1;
        }
    }
    for (k, p) in patches.iter().enumerate() {
        for (t, &c) in p.class.iter().enumerate() {
            let on_gamma = matches!(c, DofClass::InterfaceValue | DofClass::InterfaceDerivative);
            if on_gamma != (hits[k][t] == 1) || hits[k][t] > 1 {
                return Err(Error::Topology(format!("dof {t} of patch {k} lacks a unique partner")));
            }
        }
    }

    Ok(DofTable { n_primal: 4 * primal_vertices.len(), primal_vertices, patches, multipliers })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{builtin_domain, two_squares};

    fn bases(mp: &MultiPatch, p: usize, r: u32) -> Vec<TensorBasis2D> {
        vec![TensorBasis2D::uniform(p, r).unwrap(); mp.num_patches()]
    }

    #[test]
    fn two_squares_counts() {
        let mp = two_squares();
        let t = classify_dofs(&mp, &bases(&mp, 2, 3)).unwrap();
        assert_eq!(t.n_lambda(), 12);
        assert_eq!(t.n_primal, 0);
        for p in &t.patches {
            assert_eq!(p.count(DofClass::Primal), 0);
            assert_eq!(p.value.len(), 6);
            assert_eq!(p.deriv.len(), 6);
            // Three clamped sides leave (N-2) x (N-4) columns of free dofs.
            assert_eq!(p.n_free(), 8 * 6);
        }
    }

    #[test]
    fn four_squares_share_one_vertex() {
        let mp = builtin_domain("unit_square", 2).unwrap();
        let t = classify_dofs(&mp, &bases(&mp, 2, 3)).unwrap();
        assert_eq!(t.n_primal, 4);
        let locals: usize = t.patches.iter().map(|p| p.primal.len()).sum();
        assert_eq!(locals, 16);
        for p in &t.patches {
            let mut g: Vec<usize> = p.primal_global.iter().map(|e| e.0).collect();
            g.sort_unstable();
            assert_eq!(g, vec![0, 1, 2, 3]);
            assert!(p.primal_global.iter().all(|e| e.1.abs() == 1.0));
        }
    }

    #[test]
    fn clamped_corner_is_eliminated() {
        let mp = two_squares();
        let t = classify_dofs(&mp, &bases(&mp, 3, 2)).unwrap();
        let p = &t.patches[0];
        for c in Corner::ALL {
            for comp in 0..4 {
                let d = corner_dof(p.dims, c, comp % 2, comp / 2);
                assert_eq!(p.class[d], DofClass::Eliminated);
            }
        }
    }

    #[test]
    fn annulus_primal_count() {
        let mp = builtin_domain("quarter_annulus", 4).unwrap();
        let t = classify_dofs(&mp, &bases(&mp, 2, 3)).unwrap();
        assert_eq!(t.n_primal, 36);
        assert_eq!(t.n_lambda(), 24 * 12);
    }

    #[test]
    fn reversed_interface_pairs_mirrored_dofs() {
        use crate::geometry::GeometryMap;
        let a = GeometryMap::rectangle(0.0, 1.0, 0.0, 1.0);
        let b = GeometryMap::rectangle(1.0, 2.0, 1.0, 0.0);
        let mp = MultiPatch::from_patches(vec![a, b]).unwrap();
        let t = classify_dofs(&mp, &bases(&mp, 2, 3)).unwrap();
        let m = t.multipliers[0];
        let (_, ia, _) = m.entries[0];
        let (_, ib, _) = m.entries[1];
        assert_eq!(ia, side_dof((10, 10), Side::East, 0, 2));
        assert_eq!(ib, side_dof((10, 10), Side::West, 0, 7));
    }
}
