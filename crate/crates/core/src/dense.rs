//! Dense reference routines for small problems: full generalized
//! decomposition and subspace comparison. Used to validate the sparse path.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::graph::LaplacianPair;

/// All generalized eigen-pairs of `(L, D)` by dense symmetric decomposition of
/// `D^{-1/2} L D^{-1/2}`; ascending, D-normalized, trivial pair included.
pub fn generalized_eigen(lap: &DMatrix<f64>, deg: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
    let n = deg.len();
    let s = DVector::from_iterator(n, deg.iter().map(|d| 1.0 / d.sqrt()));
    let nmat = DMatrix::from_fn(n, n, |i, j| s[i] * lap[(i, j)] * s[j]);
    let eig = SymmetricEigen::new(nmat);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])] * s[r]);
    (vals, vecs)
}

pub fn generalized_eigen_of(pair: &LaplacianPair) -> (Vec<f64>, DMatrix<f64>) {
    generalized_eigen(&pair.lap.to_dense(), &pair.deg)
}

/// Largest principal angle between the column spaces of `a` and `b` under the
/// inner product `x' W y` for diagonal weights `w`.
pub fn max_principal_angle(a: &DMatrix<f64>, b: &DMatrix<f64>, w: &[f64]) -> f64 {
    let qa = weighted_orthonormal(a, w);
    let qb = weighted_orthonormal(b, w);
    let wd = DMatrix::from_diagonal(&DVector::from_row_slice(w));
    let resid = &qa - &qb * (qb.transpose() * &wd * &qa);
    let sq = DVector::from_iterator(w.len(), w.iter().map(|x| x.sqrt()));
    let scaled = DMatrix::from_fn(resid.nrows(), resid.ncols(), |i, j| resid[(i, j)] * sq[i]);
    let smax = scaled.svd(false, false).singular_values.max();
    smax.min(1.0).asin()
}

fn weighted_orthonormal(a: &DMatrix<f64>, w: &[f64]) -> DMatrix<f64> {
    let sq = DVector::from_iterator(w.len(), w.iter().map(|x| x.sqrt()));
    let scaled = DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * sq[i]);
    let q = scaled.qr().q();
    DMatrix::from_fn(q.nrows(), q.ncols(), |i, j| q[(i, j)] / sq[i])
}
