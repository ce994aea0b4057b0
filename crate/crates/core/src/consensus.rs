//! Correlation-maximizing fusion of two `n x k` views into one `n x l`
//! embedding.
//!
//! With `Z = [Y_A, Y_X]`, the projection `P` holds the top-`l` solutions of
//!
//! ```text
//! Z'Z p = γ B p,    B = blockdiag(Y_A'Y_A, Y_X'Y_X) + ridge·I
//! ```
//!
//! taken by largest `γ`, and the fused embedding is `Y = Z P`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::canonicalize_sign;

/// Scale of the default ridge relative to the mean diagonal of `B`.
pub const DEFAULT_RIDGE_FACTOR: f64 = 1e-8;

/// Smallest acceptable Cholesky pivot of `B`, relative to its largest diagonal.
const SINGULAR_TOL: f64 = 1e-13;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsensusProjection {
    /// `2k x l`, columns B-orthonormal.
    pub p: DMatrix<f64>,
    /// Descending.
    pub gammas: Vec<f64>,
    /// Ridge actually added to `B`.
    pub ridge: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsensusEmbedding {
    pub y: DMatrix<f64>,
}

/// `[Y_A, Y_X]`.
pub fn stack_views(ya: &DMatrix<f64>, yx: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if ya.nrows() != yx.nrows() || ya.ncols() != yx.ncols() {
        return Err(Error::DimensionMismatch {
            context: "consensus views",
            expected: format!("{:?}", ya.shape()),
            actual: format!("{:?}", yx.shape()),
        });
    }
    let (n, k) = ya.shape();
    let mut z = DMatrix::zeros(n, 2 * k);
    z.columns_mut(0, k).copy_from(ya);
    z.columns_mut(k, k).copy_from(yx);
    Ok(z)
}

/// Left and right matrices of the fusion problem, without the ridge.
pub fn fusion_matrices(ya: &DMatrix<f64>, yx: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let z = stack_views(ya, yx)?;
    let k = ya.ncols();
    let left = z.transpose() * &z;
    let mut right = DMatrix::zeros(2 * k, 2 * k);
    right
        .view_mut((0, 0), (k, k))
        .copy_from(&left.view((0, 0), (k, k)));
    right
        .view_mut((k, k), (k, k))
        .copy_from(&left.view((k, k), (k, k)));
    Ok((left, right))
}

pub fn default_ridge(right: &DMatrix<f64>) -> f64 {
    DEFAULT_RIDGE_FACTOR * right.trace() / right.nrows() as f64
}

pub fn fuse(
    ya: &DMatrix<f64>,
    yx: &DMatrix<f64>,
    l: usize,
    ridge: Option<f64>,
) -> Result<(ConsensusProjection, ConsensusEmbedding)> {
    let k = ya.ncols();
    if k == 0 {
        return Err(Error::InvalidInput("views need at least one column".into()));
    }
    if l == 0 || l > 2 * k {
        return Err(Error::InvalidInput(format!("l = {l} must lie in 1..={}", 2 * k)));
    }
    let (left, mut right) = fusion_matrices(ya, yx)?;
    if left.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("views contain non-finite values".into()));
    }
    let ridge = match ridge {
        Some(r) if !(r >= 0.0 && r.is_finite()) => {
            return Err(Error::InvalidInput(format!("ridge must be finite and non-negative, got {r}")))
        }
        Some(r) => r,
        None => default_ridge(&right),
    };
    for i in 0..2 * k {
        right[(i, i)] += ridge;
    }

    let scale = right.diagonal().max();
    if !(scale > 0.0) {
        return Err(Error::SingularConstraint);
    }
    let chol = right.clone().cholesky().ok_or(Error::SingularConstraint)?;
    let lower = chol.l();
    if lower.diagonal().iter().any(|&d| d * d <= SINGULAR_TOL * scale) {
        return Err(Error::SingularConstraint);
    }

    // L^{-1} C L^{-T}
    let linv_c = lower
        .solve_lower_triangular(&left)
        .ok_or(Error::SingularConstraint)?;
    let m = lower
        .solve_lower_triangular(&linv_c.transpose())
        .ok_or(Error::SingularConstraint)?;
    let m = (&m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..2 * k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let lt = lower.transpose();
    let mut p = DMatrix::zeros(2 * k, l);
    let mut gammas = Vec::with_capacity(l);
    for (c, &idx) in order.iter().take(l).enumerate() {
        let u = eig.eigenvectors.column(idx).into_owned();
        let mut col: Vec<f64> = lt
            .solve_upper_triangular(&u)
            .ok_or(Error::SingularConstraint)?
            .iter()
            .copied()
            .collect();
        canonicalize_sign(&mut col);
        p.column_mut(c).copy_from_slice(&col);
        gammas.push(eig.eigenvalues[idx]);
    }
    let y = stack_views(ya, yx)? * &p;
    Ok((ConsensusProjection { p, gammas, ridge }, ConsensusEmbedding { y }))
}

/// Value of the fusion objective `p' Z'Z p` and of the constraint `p' B p`
/// (no ridge) for one stacked vector.
pub fn objective(ya: &DMatrix<f64>, yx: &DMatrix<f64>, p: &[f64]) -> Result<(f64, f64)> {
    let (left, right) = fusion_matrices(ya, yx)?;
    let v = nalgebra::DVector::from_row_slice(p);
    Ok((
        (v.transpose() * &left * &v)[(0, 0)],
        (v.transpose() * &right * &v)[(0, 0)],
    ))
}

#[cfg(test)]
mod tests;
