//! Compressed sparse row storage.
//!
//! [`CsrMatrix`] is a general rectangular matrix; [`SparseSym`] wraps a square
//! one whose pattern and values were checked for symmetry at construction.

use super::LinalgError;

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from `(row, col, value)` triplets. Duplicates are summed
    /// and entries that end up exactly zero are dropped.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self, LinalgError> {
        let mut counts = vec![0usize; nrows + 1];
        for &(r, c, _) in triplets {
            if r >= nrows || c >= ncols {
                return Err(LinalgError::IndexOutOfBounds { row: r, col: c, nrows, ncols });
            }
            counts[r + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut fill = counts.clone();
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0f64; triplets.len()];
        for &(r, c, v) in triplets {
            let k = fill[r];
            cols[k] = c;
            vals[k] = v;
            fill[r] += 1;
        }

        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        let mut scratch: Vec<(usize, f64)> = Vec::new();
        for r in 0..nrows {
            scratch.clear();
            scratch.extend((counts[r]..counts[r + 1]).map(|k| (cols[k], vals[k])));
            scratch.sort_by_key(|e| e.0);
            let mut k = 0;
            while k < scratch.len() {
                let c = scratch[k].0;
                let mut sum = 0.0;
                while k < scratch.len() && scratch[k].0 == c {
                    sum += scratch[k].1;
                    k += 1;
                }
                if sum != 0.0 {
                    col_idx.push(c);
                    values.push(sum);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self { nrows, ncols, row_ptr, col_idx, values })
    }

    /// Builds a matrix from already sorted, duplicate-free rows.
    pub(crate) fn from_rows(ncols: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let nrows = rows.len();
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for row in rows {
            for (c, v) in row {
                if v != 0.0 {
                    debug_assert!(c < ncols);
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self { nrows, ncols, row_ptr, col_idx, values }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_rows(n, (0..n).map(|i| vec![(i, 1.0)]).collect())
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col_idx[s..e], &self.values[s..e])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            *yi = cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum();
        }
    }

    /// `y = Aᵀ x`.
    pub fn mul_t_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![0.0; self.ncols];
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                y[c] += v * xi;
            }
        }
        y
    }

    /// Extracts the block with the given rows and columns, renumbered in the
    /// order they are listed.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> CsrMatrix {
        let mut col_map = vec![usize::MAX; self.ncols];
        for (k, &c) in cols.iter().enumerate() {
            col_map[c] = k;
        }
        let out_rows = rows
            .iter()
            .map(|&r| {
                let (cs, vs) = self.row(r);
                let mut row: Vec<(usize, f64)> = cs
                    .iter()
                    .zip(vs)
                    .filter_map(|(&c, &v)| (col_map[c] != usize::MAX).then(|| (col_map[c], v)))
                    .collect();
                row.sort_by_key(|e| e.0);
                row
            })
            .collect();
        CsrMatrix::from_rows(cols.len(), out_rows)
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.ncols];
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                rows[c].push((i, v));
            }
        }
        CsrMatrix::from_rows(self.nrows, rows)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut d = nalgebra::DMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                d[(i, c)] = v;
            }
        }
        d
    }
}

/// Square symmetric sparse matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseSym {
    inner: CsrMatrix,
}

/// Relative tolerance used when validating symmetry.
pub const SYMMETRY_TOL: f64 = 1e-12;

impl SparseSym {
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self, LinalgError> {
        Self::new(CsrMatrix::from_triplets(n, n, triplets)?)
    }

    pub fn new(inner: CsrMatrix) -> Result<Self, LinalgError> {
        if inner.nrows() != inner.ncols() {
            return Err(LinalgError::DimensionMismatch {
                expected: inner.nrows(),
                found: inner.ncols(),
            });
        }
        let scale = inner.max_abs();
        for i in 0..inner.nrows() {
            let (cols, vals) = inner.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let t = inner.get(j, i);
                if (v - t).abs() > SYMMETRY_TOL * scale {
                    return Err(LinalgError::NotSymmetric { row: i, col: j });
                }
            }
        }
        Ok(Self { inner })
    }

    /// Wraps a matrix the caller has constructed symmetrically.
    pub(crate) fn new_unchecked(inner: CsrMatrix) -> Self {
        debug_assert_eq!(inner.nrows(), inner.ncols());
        Self { inner }
    }

    pub fn identity(n: usize) -> Self {
        Self { inner: CsrMatrix::identity(n) }
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let rows = d.iter().enumerate().map(|(i, &v)| vec![(i, v)]).collect();
        Self { inner: CsrMatrix::from_rows(d.len(), rows) }
    }

    pub fn n(&self) -> usize {
        self.inner.nrows()
    }

    pub fn csr(&self) -> &CsrMatrix {
        &self.inner
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.inner.get(i, j)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        self.inner.mul_vec(x)
    }

    /// Principal submatrix on `idx`.
    pub fn principal(&self, idx: &[usize]) -> SparseSym {
        SparseSym { inner: self.inner.submatrix(idx, idx) }
    }

    pub fn max_diagonal(&self) -> f64 {
        (0..self.n()).map(|i| self.get(i, i).abs()).fold(0.0, f64::max)
    }

    /// Largest entry of `|A - Aᵀ|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n() {
            let (cols, vals) = self.inner.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                worst = worst.max((v - self.inner.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        self.inner.to_dense()
    }

    pub fn from_dense(d: &nalgebra::DMatrix<f64>) -> Result<Self, LinalgError> {
        let mut trip = Vec::new();
        for i in 0..d.nrows() {
            for j in 0..d.ncols() {
                if d[(i, j)] != 0.0 {
                    trip.push((i, j, d[(i, j)]));
                }
            }
        }
        Self::from_triplets(d.nrows(), &trip)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates_and_drop_zeros() {
        let m = CsrMatrix::from_triplets(2, 3, &[(0, 1, 1.0), (0, 1, 2.0), (1, 2, 1.0), (1, 2, -1.0)])
            .unwrap();
        assert_eq!(m.get(0, 1), 3.0);
        assert_eq!(m.nnz(), 1);
    }

    #[test]
    fn asymmetric_input_is_rejected() {
        let err = SparseSym::from_triplets(2, &[(0, 1, 1.0), (1, 0, 2.0)]).unwrap_err();
        assert!(matches!(err, LinalgError::NotSymmetric { .. }));
    }

    #[test]
    fn out_of_range_triplet() {
        assert!(CsrMatrix::from_triplets(2, 2, &[(2, 0, 1.0)]).is_err());
    }

    #[test]
    fn submatrix_and_transpose() {
        let m = CsrMatrix::from_triplets(3, 3, &[(0, 0, 1.0), (0, 2, 2.0), (2, 1, 3.0)]).unwrap();
        let s = m.submatrix(&[2, 0], &[1, 2]);
        assert_eq!(s.get(0, 0), 3.0);
        assert_eq!(s.get(1, 1), 2.0);
        let t = m.transpose();
        assert_eq!(t.get(2, 0), 2.0);
        assert_eq!(m.mul_t_vec(&[1.0, 0.0, 1.0]), vec![1.0, 3.0, 2.0]);
    }
}
