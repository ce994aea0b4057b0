//! Smallest nontrivial generalized eigen-pairs of `L a = λ D a`.
//!
//! The problem is reduced to the standard symmetric problem for
//! `N = D^{-1/2} L D^{-1/2}` with `v = D^{1/2} a`. Since the spectrum of `N`
//! lies in `[0, 2]`, the smallest eigenvalues of `N` are the largest of
//! `2I - N`, which Lanczos finds without factorizing anything. The trivial
//! direction `D^{1/2} 1` is deflated explicitly.

mod lanczos;

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::LaplacianPair;
use crate::sparse::CsrMatrix;
use lanczos::{largest_eigenpairs, LanczosOptions, SymmetricOperator};

/// Ritz residual tolerance on the normalized problem.
pub const RITZ_TOL: f64 = 1e-10;
/// Eigenvalues below this count as zero in diagnostics.
pub const NEAR_ZERO: f64 = 1e-9;
const SHIFT: f64 = 2.0;
const DEGENERATE_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenPair {
    pub value: f64,
    pub vector: Vec<f64>,
}

impl EigenPair {
    /// `‖L a − λ D a‖₂`.
    pub fn residual(&self, pair: &LaplacianPair) -> f64 {
        let la = pair.lap.mul_vec(&self.vector);
        la.iter()
            .zip(&self.vector)
            .zip(&pair.deg)
            .map(|((l, a), d)| {
                let r = l - self.value * d * a;
                r * r
            })
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    /// Returned eigenvalues below [`NEAR_ZERO`]; nonzero means the graph has
    /// more than one connected component (or floored isolated nodes).
    pub near_zero: usize,
    pub restarts: usize,
    pub matvecs: usize,
}

/// Top-k pairs (ascending λ, trivial pair excluded) with the Laplacian pair
/// they were computed for.
#[derive(Clone, Debug)]
pub struct SpectralState {
    pub pairs: Vec<EigenPair>,
    pub laplacian: Arc<LaplacianPair>,
    pub diagnostics: SolveDiagnostics,
}

impl SpectralState {
    pub fn new(pairs: Vec<EigenPair>, laplacian: Arc<LaplacianPair>) -> Self {
        SpectralState {
            pairs,
            laplacian,
            diagnostics: SolveDiagnostics::default(),
        }
    }

    pub fn k(&self) -> usize {
        self.pairs.len()
    }

    pub fn n(&self) -> usize {
        self.laplacian.n()
    }

    pub fn values(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.value).collect()
    }

    pub fn residuals(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.residual(&self.laplacian)).collect()
    }
}

struct NormalizedShifted<'a> {
    lap: &'a CsrMatrix,
    inv_sqrt_deg: Vec<f64>,
    scratch: std::cell::RefCell<Vec<f64>>,
}

impl SymmetricOperator for NormalizedShifted<'_> {
    fn dim(&self) -> usize {
        self.inv_sqrt_deg.len()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let mut s = self.scratch.borrow_mut();
        for ((si, xi), di) in s.iter_mut().zip(x).zip(&self.inv_sqrt_deg) {
            *si = xi * di;
        }
        self.lap.mul_vec_into(&s, out);
        for ((o, xi), di) in out.iter_mut().zip(x).zip(&self.inv_sqrt_deg) {
            *o = SHIFT * xi - di * *o;
        }
    }
}

/// Flips `v` so that its entry of largest magnitude (first on ties) is positive.
pub fn canonicalize_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// The `k` smallest nontrivial generalized eigen-pairs of `lap a = λ deg a`,
/// D-orthonormal, ascending, sign-canonical, and deterministic for a seed.
pub fn solve_topk(pair: &Arc<LaplacianPair>, k: usize, seed: u64) -> Result<SpectralState> {
    let n = pair.n();
    if k == 0 {
        return Err(Error::InvalidInput("k must be positive".into()));
    }
    if k + 1 > n {
        return Err(Error::TooManyPairs { k, n });
    }
    if let Some(node) = pair.deg.iter().position(|&d| !(d > 0.0)) {
        return Err(Error::ZeroDegree { node });
    }
    let sqrt_deg: Vec<f64> = pair.deg.iter().map(|d| d.sqrt()).collect();
    let inv_sqrt_deg: Vec<f64> = sqrt_deg.iter().map(|s| 1.0 / s).collect();
    let norm = sqrt_deg.iter().map(|s| s * s).sum::<f64>().sqrt();
    let trivial: Vec<f64> = sqrt_deg.iter().map(|s| s / norm).collect();

    let op = NormalizedShifted {
        lap: &pair.lap,
        inv_sqrt_deg: inv_sqrt_deg.clone(),
        scratch: std::cell::RefCell::new(vec![0.0; n]),
    };
    let opts = LanczosOptions {
        nev: k,
        ncv: (2 * k + 20).max(3 * k),
        tol: RITZ_TOL,
        max_restarts: 50 * k,
        seed,
    };
    let out = largest_eigenpairs(&op, std::slice::from_ref(&trivial), &opts)?;

    let mut pairs: Vec<EigenPair> = out
        .values
        .iter()
        .zip(out.vectors)
        .map(|(&theta, v)| {
            let value = (SHIFT - theta).max(0.0);
            let mut vector: Vec<f64> = v.iter().zip(&inv_sqrt_deg).map(|(x, s)| x * s).collect();
            canonicalize_sign(&mut vector);
            EigenPair { value, vector }
        })
        .collect();
    // Lanczos returns descending θ, i.e. ascending λ; the stable sort only
    // settles values that rounding left out of order.
    pairs.sort_by(|a, b| a.value.total_cmp(&b.value));
    let mut vectors: Vec<Vec<f64>> = pairs.iter().map(|p| p.vector.clone()).collect();
    d_orthonormalize(&mut vectors, &pair.deg)?;
    for (p, mut v) in pairs.iter_mut().zip(vectors) {
        canonicalize_sign(&mut v);
        p.vector = v;
    }
    let diagnostics = SolveDiagnostics {
        near_zero: pairs.iter().filter(|p| p.value < NEAR_ZERO).count(),
        restarts: out.restarts,
        matvecs: out.matvecs,
    };
    if diagnostics.near_zero > 0 {
        log::info!(
            "{} near-zero nontrivial eigenvalues: graph is disconnected",
            diagnostics.near_zero
        );
    }
    Ok(SpectralState {
        pairs,
        laplacian: Arc::clone(pair),
        diagnostics,
    })
}

/// `n x k` matrix whose column `j` is the `j`-th returned eigenvector.
pub fn embedding_matrix(state: &SpectralState) -> DMatrix<f64> {
    let n = state.n();
    let k = state.k();
    DMatrix::from_fn(n, k, |i, j| state.pairs[j].vector[i])
}

fn d_dot(a: &[f64], b: &[f64], deg: &[f64]) -> f64 {
    a.iter().zip(b).zip(deg).map(|((x, y), d)| x * d * y).sum()
}

/// In-place Gram-Schmidt (two passes per vector) under `<x, y>_D = x' D y`,
/// preserving order.
pub fn d_orthonormalize(vectors: &mut [Vec<f64>], deg: &[f64]) -> Result<()> {
    for i in 0..vectors.len() {
        let (done, rest) = vectors.split_at_mut(i);
        let v = &mut rest[0];
        let before = d_dot(v, v, deg).sqrt();
        for _ in 0..2 {
            for u in done.iter() {
                let c = d_dot(u, v, deg);
                v.iter_mut().zip(u).for_each(|(x, y)| *x -= c * y);
            }
        }
        let after = d_dot(v, v, deg).sqrt();
        if !(after > DEGENERATE_TOL * before) {
            return Err(Error::DegenerateBasis { index: i });
        }
        v.iter_mut().for_each(|x| *x /= after);
    }
    Ok(())
}

/// Restores `a_i' D a_j = δ_ij` under the state's own degree matrix.
pub fn reorthonormalize(state: &SpectralState) -> Result<SpectralState> {
    let mut vectors: Vec<Vec<f64>> = state.pairs.iter().map(|p| p.vector.clone()).collect();
    d_orthonormalize(&mut vectors, &state.laplacian.deg)?;
    let pairs = state
        .pairs
        .iter()
        .zip(vectors)
        .map(|(p, vector)| EigenPair {
            value: p.value,
            vector,
        })
        .collect();
    Ok(SpectralState {
        pairs,
        laplacian: Arc::clone(&state.laplacian),
        diagnostics: state.diagnostics.clone(),
    })
}

/// Largest `|a_i' D a_j − δ_ij|` over all pairs.
pub fn orthonormality_error(vectors: &[Vec<f64>], deg: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..vectors.len() {
        for j in 0..=i {
            let g = d_dot(&vectors[i], &vectors[j], deg);
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g - target).abs());
        }
    }
    worst
}
