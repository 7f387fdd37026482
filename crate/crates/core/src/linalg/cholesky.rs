//! Envelope (skyline) factorization of sparse symmetric matrices.
//!
//! Rows are reordered with reverse Cuthill–McKee before factorization, and the
//! factor is stored row-wise from the first structurally nonzero column of
//! each row down to the diagonal.

use std::collections::VecDeque;

use super::{LinalgError, SparseSym};

/// Relative pivot threshold (times the largest diagonal entry).
const PIVOT_TOL: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FactorKind {
    /// `A = L Lᵀ`.
    Cholesky,
    /// `A = L D Lᵀ` with unit `L`, no pivoting.
    Ldlt,
}

/// Factor of a symmetric matrix, reusable for any number of solves.
#[derive(Clone, Debug)]
pub struct Factorization {
    n: usize,
    kind: FactorKind,
    /// `perm[new] = old`.
    perm: Vec<usize>,
    first: Vec<usize>,
    start: Vec<usize>,
    values: Vec<f64>,
    diag: Vec<f64>,
}

/// Cholesky factorization; fails on a nonpositive pivot.
pub fn factorize(a: &SparseSym) -> Result<Factorization, LinalgError> {
    factorize_kind(a, FactorKind::Cholesky)
}

pub fn factorize_kind(a: &SparseSym, kind: FactorKind) -> Result<Factorization, LinalgError> {
    let n = a.n();
    if n == 0 {
        return Ok(Factorization {
            n,
            kind,
            perm: Vec::new(),
            first: Vec::new(),
            start: vec![0],
            values: Vec::new(),
            diag: Vec::new(),
        });
    }
    let perm = rcm_ordering(a);
    let mut inv = vec![0usize; n];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }
    let csr = a.csr();

    let mut first = vec![0usize; n];
    for (new, &old) in perm.iter().enumerate() {
        let (cols, _) = csr.row(old);
        first[new] = cols.iter().map(|&c| inv[c]).fold(new, usize::min);
    }
    let mut start = Vec::with_capacity(n + 1);
    start.push(0usize);
    for i in 0..n {
        start.push(start[i] + (i - first[i] + 1));
    }
    let mut values = vec![0.0; start[n]];
    for (new, &old) in perm.iter().enumerate() {
        let (cols, vals) = csr.row(old);
        for (&c, &v) in cols.iter().zip(vals) {
            let j = inv[c];
            if j <= new {
                values[start[new] + j - first[new]] = v;
            }
        }
    }

    let threshold = PIVOT_TOL * a.max_diagonal();
    let mut diag = vec![1.0; n];
    for i in 0..n {
        let fi = first[i];
        let row_i = start[i];
        for j in fi..i {
            let fj = first[j];
            let k0 = fi.max(fj);
            let (head, tail) = values.split_at_mut(row_i);
            let li = &mut tail[..i - fi + 1];
            let lj = &head[start[j]..start[j + 1]];
            // For LDLᵀ, li still holds the unscaled products L_ik D_k.
            let s: f64 = li[k0 - fi..j - fi]
                .iter()
                .zip(&lj[k0 - fj..j - fj])
                .map(|(x, y)| x * y)
                .sum();
            li[j - fi] -= s;
            if kind == FactorKind::Cholesky {
                li[j - fi] /= lj[j - fj];
            }
        }
        let li = &mut values[row_i..start[i + 1]];
        let pivot = match kind {
            FactorKind::Cholesky => {
                let s: f64 = li[..i - fi].iter().map(|x| x * x).sum();
                li[i - fi] - s
            }
            FactorKind::Ldlt => {
                let mut s = 0.0;
                for k in fi..i {
                    let t = li[k - fi];
                    let l = t / diag[k];
                    s += t * l;
                    li[k - fi] = l;
                }
                li[i - fi] - s
            }
        };
        if !(pivot.abs() >= threshold) {
            return Err(LinalgError::SingularMatrix { row: perm[i], pivot, threshold });
        }
        match kind {
            FactorKind::Cholesky => {
                if pivot <= 0.0 {
                    return Err(LinalgError::NotPositiveDefinite { row: perm[i], pivot });
                }
                li[i - fi] = pivot.sqrt();
            }
            FactorKind::Ldlt => {
                li[i - fi] = 1.0;
                diag[i] = pivot;
            }
        }
    }
    Ok(Factorization { n, kind, perm, first, start, values, diag })
}

impl Factorization {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> FactorKind {
        self.kind
    }

    /// Number of stored factor entries.
    pub fn envelope_size(&self) -> usize {
        self.values.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n, "right-hand side has wrong length");
        let n = self.n;
        let mut y: Vec<f64> = self.perm.iter().map(|&o| b[o]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.values[self.start[i]..self.start[i + 1]];
            let s: f64 = row[..i - fi].iter().zip(&y[fi..i]).map(|(l, v)| l * v).sum();
            y[i] = (y[i] - s) / row[i - fi];
        }
        if self.kind == FactorKind::Ldlt {
            for (yi, d) in y.iter_mut().zip(&self.diag) {
                *yi /= d;
            }
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.values[self.start[i]..self.start[i + 1]];
            let xi = y[i] / row[i - fi];
            y[i] = xi;
            if xi != 0.0 {
                for (yj, l) in y[fi..i].iter_mut().zip(&row[..i - fi]) {
                    *yj -= l * xi;
                }
            }
        }
        for (new, &old) in self.perm.iter().enumerate() {
            b[old] = y[new];
        }
    }

    /// Solves for each column of a column-major block.
    pub fn solve_columns(&self, cols: &[Vec<f64>]) -> Vec<Vec<f64>> {
        cols.iter().map(|c| self.solve(c)).collect()
    }
}

/// Reverse Cuthill–McKee ordering of the sparsity graph; returns `perm[new] = old`.
pub fn rcm_ordering(a: &SparseSym) -> Vec<usize> {
    let n = a.n();
    let csr = a.csr();
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|i| csr.row(i).0.iter().copied().filter(|&j| j != i).collect())
        .collect();
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&i| (degree[i], i));

    for &seed in &by_degree {
        if visited[seed] {
            continue;
        }
        let root = pseudo_peripheral(seed, &adj, &degree);
        let mut queue = VecDeque::new();
        queue.push_back(root);
        visited[root] = true;
        let mut nbrs = Vec::new();
        while let Some(v) = queue.pop_front() {
            order.push(v);
            nbrs.clear();
            nbrs.extend(adj[v].iter().copied().filter(|&w| !visited[w]));
            nbrs.sort_by_key(|&w| (degree[w], w));
            for &w in &nbrs {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

fn bfs_levels(root: usize, adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut seen = std::collections::HashSet::new();
    seen.insert(root);
    let mut levels = vec![vec![root]];
    loop {
        let mut next = Vec::new();
        for &v in levels.last().unwrap() {
            for &w in &adj[v] {
                if seen.insert(w) {
                    next.push(w);
                }
            }
        }
        if next.is_empty() {
            return levels;
        }
        levels.push(next);
    }
}

fn pseudo_peripheral(seed: usize, adj: &[Vec<usize>], degree: &[usize]) -> usize {
    let mut root = seed;
    let mut depth = bfs_levels(root, adj).len();
    for _ in 0..8 {
        let levels = bfs_levels(root, adj);
        let candidate = *levels
            .last()
            .unwrap()
            .iter()
            .min_by_key(|&&v| (degree[v], v))
            .unwrap();
        let cand_depth = bfs_levels(candidate, adj).len();
        if cand_depth > depth {
            root = candidate;
            depth = cand_depth;
        } else {
            break;
        }
    }
    root
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::norm2;
    use nalgebra::DMatrix;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        g.transpose() * &g + DMatrix::identity(n, n)
    }

    fn residual(a: &SparseSym, x: &[f64], b: &[f64]) -> f64 {
        let ax = a.mul_vec(x);
        let r: Vec<f64> = ax.iter().zip(b).map(|(p, q)| p - q).collect();
        norm2(&r) / norm2(b)
    }

    #[test]
    fn identity_solve() {
        let f = factorize(&SparseSym::identity(3)).unwrap();
        assert_eq!(f.solve(&[1.0, 2.0, 3.0]), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn diagonal_solve() {
        let f = factorize(&SparseSym::from_diagonal(&[2.0, 8.0])).unwrap();
        let x = f.solve(&[2.0, 8.0]);
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn random_spd_residual() {
        let a = SparseSym::from_dense(&random_spd(5, 7)).unwrap();
        let b = [0.3, -1.0, 2.0, 0.5, 1.5];
        for kind in [FactorKind::Cholesky, FactorKind::Ldlt] {
            let x = factorize_kind(&a, kind).unwrap().solve(&b);
            assert!(residual(&a, &x, &b) <= 1e-10);
        }
    }

    #[test]
    fn indefinite_needs_ldlt() {
        let a = SparseSym::from_diagonal(&[2.0, -3.0]);
        assert!(matches!(factorize(&a), Err(LinalgError::NotPositiveDefinite { .. })));
        let x = factorize_kind(&a, FactorKind::Ldlt).unwrap().solve(&[2.0, 3.0]);
        assert_eq!(x, vec![1.0, -1.0]);
    }

    #[test]
    fn singular_is_detected() {
        let a = SparseSym::from_triplets(2, &[(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)])
            .unwrap();
        assert!(matches!(factorize(&a), Err(LinalgError::SingularMatrix { .. })));
    }

    #[test]
    fn rcm_reduces_envelope_of_shuffled_path() {
        // Path graph with a scrambled numbering.
        let n = 40;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut label: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            label.swap(i, rng.gen_range(0..=i));
        }
        let mut t = Vec::new();
        for i in 0..n {
            t.push((label[i], label[i], 4.0));
            if i + 1 < n {
                t.push((label[i], label[i + 1], -1.0));
                t.push((label[i + 1], label[i], -1.0));
            }
        }
        let a = SparseSym::from_triplets(n, &t).unwrap();
        let f = factorize(&a).unwrap();
        assert_eq!(f.envelope_size(), 2 * n - 1);
    }

    proptest! {
        #[test]
        fn factor_residual_banded(n in 1usize..40, band in 0usize..6, seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut t = Vec::new();
            for i in 0..n {
                t.push((i, i, 2.0 * band as f64 + 1.0 + rng.gen::<f64>()));
                for j in (i + 1)..n.min(i + band + 1) {
                    let v = rng.gen_range(-1.0..1.0);
                    t.push((i, j, v));
                    t.push((j, i, v));
                }
            }
            let a = SparseSym::from_triplets(n, &t).unwrap();
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            prop_assume!(norm2(&b) > 0.0);
            for kind in [FactorKind::Cholesky, FactorKind::Ldlt] {
                let x = factorize_kind(&a, kind).unwrap().solve(&b);
                prop_assert!(residual(&a, &x, &b) <= 1e-10);
            }
        }
    }
}
