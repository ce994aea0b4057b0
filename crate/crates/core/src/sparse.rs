//! Compressed sparse row storage for the adjacency, attribute, similarity and
//! Laplacian matrices, plus the sparse diagonal used for degree changes.
//!
//! Column indices are sorted within each row and explicit zeros are never
//! stored, so two matrices with the same entries have identical buffers.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        CsrMatrix {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds a canonical matrix from `(row, col, value)` triplets. Duplicates
    /// are summed and entries that end up exactly zero are dropped.
    pub fn from_triplets<I>(nrows: usize, ncols: usize, triplets: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut entries: Vec<(usize, usize, f64)> = triplets.into_iter().collect();
        for &(r, c, _) in &entries {
            if r >= nrows || c >= ncols {
                return Err(Error::DimensionMismatch {
                    context: "triplet index",
                    expected: format!("< {nrows}x{ncols}"),
                    actual: format!("({r}, {c})"),
                });
            }
        }
        entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0; nrows + 1];
        let mut indices = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        let mut iter = entries.into_iter().peekable();
        while let Some((r, c, mut v)) = iter.next() {
            while let Some(&(r2, c2, v2)) = iter.peek() {
                if r2 == r && c2 == c {
                    v += v2;
                    iter.next();
                } else {
                    break;
                }
            }
            if v != 0.0 {
                indptr[r + 1] += 1;
                indices.push(c);
                values.push(v);
            }
        }
        for r in 0..nrows {
            indptr[r + 1] += indptr[r];
        }
        Ok(CsrMatrix {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        })
    }

    /// Symmetric matrix from upper-or-lower triplets: every off-diagonal
    /// `(i, j, v)` is stored at both `(i, j)` and `(j, i)`.
    pub fn symmetric_from_triplets<I>(n: usize, triplets: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut all = Vec::new();
        for (i, j, v) in triplets {
            all.push((i, j, v));
            if i != j {
                all.push((j, i, v));
            }
        }
        Self::from_triplets(n, n, all)
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let trips = (0..m.nrows())
            .flat_map(|i| (0..m.ncols()).map(move |j| (i, j)))
            .map(|(i, j)| (i, j, m[(i, j)]));
        Self::from_triplets(m.nrows(), m.ncols(), trips).expect("indices in range")
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nrows, self.ncols)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.indptr[r], self.indptr[r + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (idx, vals) = self.row(r);
        match idx.binary_search(&c) {
            Ok(p) => vals[p],
            Err(_) => 0.0,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Iterates stored entries in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |r| {
            let (idx, vals) = self.row(r);
            idx.iter().zip(vals).map(move |(&c, &v)| (r, c, v))
        })
    }

    /// Rows holding at least one stored entry.
    pub fn nonempty_rows(&self) -> Vec<usize> {
        (0..self.nrows)
            .filter(|&r| self.indptr[r + 1] > self.indptr[r])
            .collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.nrows)
            .map(|r| self.row(r).1.iter().sum())
            .collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols))
            .map(|i| self.get(i, i))
            .collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `out = self * x`.
    pub fn mul_vec_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(out.len(), self.nrows);
        for (r, o) in out.iter_mut().enumerate() {
            let (a, b) = (self.indptr[r], self.indptr[r + 1]);
            let mut acc = 0.0;
            for p in a..b {
                acc += self.values[p] * x[self.indices[p]];
            }
            *o = acc;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.nrows];
        self.mul_vec_into(x, &mut out);
        out
    }

    /// `x' M y`, touching only stored entries.
    pub fn quad_form(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut acc = 0.0;
        for r in 0..self.nrows {
            let (a, b) = (self.indptr[r], self.indptr[r + 1]);
            if a == b {
                continue;
            }
            let mut row = 0.0;
            for p in a..b {
                row += self.values[p] * y[self.indices[p]];
            }
            acc += x[r] * row;
        }
        acc
    }

    fn merge(&self, other: &CsrMatrix, sign: f64) -> Result<CsrMatrix> {
        if self.shape() != other.shape() {
            return Err(Error::DimensionMismatch {
                context: "sparse add",
                expected: format!("{:?}", self.shape()),
                actual: format!("{:?}", other.shape()),
            });
        }
        let mut indptr = Vec::with_capacity(self.nrows + 1);
        indptr.push(0);
        let mut indices = Vec::with_capacity(self.nnz() + other.nnz());
        let mut values = Vec::with_capacity(self.nnz() + other.nnz());
        for r in 0..self.nrows {
            let (ia, va) = self.row(r);
            let (ib, vb) = other.row(r);
            let (mut p, mut q) = (0, 0);
            while p < ia.len() || q < ib.len() {
                let (c, v) = if q >= ib.len() || (p < ia.len() && ia[p] < ib[q]) {
                    p += 1;
                    (ia[p - 1], va[p - 1])
                } else if p >= ia.len() || ib[q] < ia[p] {
                    q += 1;
                    (ib[q - 1], sign * vb[q - 1])
                } else {
                    p += 1;
                    q += 1;
                    (ia[p - 1], va[p - 1] + sign * vb[q - 1])
                };
                if v != 0.0 {
                    indices.push(c);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Ok(CsrMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            indptr,
            indices,
            values,
        })
    }

    pub fn add(&self, other: &CsrMatrix) -> Result<CsrMatrix> {
        self.merge(other, 1.0)
    }

    pub fn sub(&self, other: &CsrMatrix) -> Result<CsrMatrix> {
        self.merge(other, -1.0)
    }

    pub fn scale(&self, s: f64) -> CsrMatrix {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        if s == 0.0 {
            return CsrMatrix::zeros(self.nrows, self.ncols);
        }
        out
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.indices {
            counts[c + 1] += 1;
        }
        for c in 0..self.ncols {
            counts[c + 1] += counts[c];
        }
        let indptr = counts.clone();
        let mut next = counts;
        let mut indices = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for (r, c, v) in self.iter() {
            let slot = next[c];
            indices[slot] = r;
            values[slot] = v;
            next[c] += 1;
        }
        CsrMatrix {
            nrows: self.ncols,
            ncols: self.nrows,
            indptr,
            indices,
            values,
        }
    }

    /// Largest `|M(i,j) - M(j,i)|` together with its location.
    pub fn max_asymmetry(&self) -> (f64, usize, usize) {
        let mut worst = (0.0, 0, 0);
        for (r, c, v) in self.iter() {
            let d = (v - self.get(c, r)).abs();
            if d > worst.0 || d.is_nan() {
                worst = (d, r, c);
            }
        }
        worst
    }

    pub fn check_symmetric(&self, tol: f64) -> Result<()> {
        if self.nrows != self.ncols {
            return Err(Error::DimensionMismatch {
                context: "symmetric matrix",
                expected: "square".into(),
                actual: format!("{}x{}", self.nrows, self.ncols),
            });
        }
        let (diff, row, col) = self.max_asymmetry();
        if diff > tol || diff.is_nan() {
            return Err(Error::Asymmetric { row, col, diff });
        }
        Ok(())
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.iter() {
            m[(r, c)] = v;
        }
        m
    }
}

/// Diagonal matrix that stores only its nonzero entries, sorted by index.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseDiagonal {
    n: usize,
    entries: Vec<(usize, f64)>,
}

impl SparseDiagonal {
    pub fn new(n: usize, entries: impl IntoIterator<Item = (usize, f64)>) -> Self {
        let mut entries: Vec<(usize, f64)> = entries.into_iter().filter(|e| e.1 != 0.0).collect();
        entries.sort_by_key(|e| e.0);
        entries.dedup_by(|b, a| {
            if a.0 == b.0 {
                a.1 += b.1;
                true
            } else {
                false
            }
        });
        entries.retain(|e| e.1 != 0.0);
        SparseDiagonal { n, entries }
    }

    pub fn zeros(n: usize) -> Self {
        SparseDiagonal {
            n,
            entries: Vec::new(),
        }
    }

    pub fn from_dense_diff(new: &[f64], old: &[f64]) -> Self {
        let entries = new
            .iter()
            .zip(old)
            .enumerate()
            .map(|(i, (a, b))| (i, a - b));
        SparseDiagonal::new(new.len(), entries)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn get(&self, i: usize) -> f64 {
        match self.entries.binary_search_by_key(&i, |e| e.0) {
            Ok(p) => self.entries[p].1,
            Err(_) => 0.0,
        }
    }

    pub fn quad_form(&self, x: &[f64], y: &[f64]) -> f64 {
        self.entries.iter().map(|&(i, d)| x[i] * d * y[i]).sum()
    }

    pub fn to_csr(&self) -> CsrMatrix {
        CsrMatrix::from_triplets(self.n, self.n, self.entries.iter().map(|&(i, v)| (i, i, v)))
            .expect("diagonal indices in range")
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for &(i, v) in &self.entries {
            m[(i, i)] = v;
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates_and_drop_zeros() {
        let m = CsrMatrix::from_triplets(2, 3, vec![(0, 1, 1.0), (0, 1, 2.0), (1, 2, 1.0), (1, 2, -1.0)])
            .unwrap();
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.get(0, 1), 3.0);
        assert_eq!(m.get(1, 2), 0.0);
    }

    #[test]
    fn out_of_range_triplet_is_rejected() {
        assert!(CsrMatrix::from_triplets(2, 2, vec![(2, 0, 1.0)]).is_err());
    }

    #[test]
    fn add_sub_and_quad_form_match_dense() {
        let a = CsrMatrix::symmetric_from_triplets(3, vec![(0, 1, 1.0), (1, 2, 2.0)]).unwrap();
        let b = CsrMatrix::symmetric_from_triplets(3, vec![(0, 1, -1.0), (0, 2, 0.5)]).unwrap();
        let s = a.add(&b).unwrap();
        assert_eq!(s.get(0, 1), 0.0);
        assert_eq!(s.nnz(), 4);
        let d = a.sub(&b).unwrap().to_dense();
        assert_eq!(d, a.to_dense() - b.to_dense());
        let x = [1.0, -2.0, 0.5];
        let y = [0.3, 0.7, -1.1];
        let dense = a.to_dense();
        let want = (nalgebra::DVector::from_row_slice(&x).transpose()
            * &dense
            * nalgebra::DVector::from_row_slice(&y))[(0, 0)];
        assert!((a.quad_form(&x, &y) - want).abs() < 1e-15);
    }

    #[test]
    fn transpose_round_trips() {
        let a = CsrMatrix::from_triplets(2, 3, vec![(0, 2, 1.0), (1, 0, 4.0), (1, 2, -3.0)]).unwrap();
        assert_eq!(a.transpose().transpose(), a);
        assert_eq!(a.transpose().to_dense(), a.to_dense().transpose());
    }

    #[test]
    fn asymmetry_is_detected() {
        let a = CsrMatrix::from_triplets(2, 2, vec![(0, 1, 1.0), (1, 0, 1.5)]).unwrap();
        assert!(matches!(a.check_symmetric(1e-12), Err(Error::Asymmetric { .. })));
    }

    #[test]
    fn sparse_diagonal_merges() {
        let d = SparseDiagonal::new(4, vec![(2, 1.0), (0, 3.0), (2, -1.0)]);
        assert_eq!(d.entries(), &[(0, 3.0)]);
        assert_eq!(d.get(2), 0.0);
    }
}
