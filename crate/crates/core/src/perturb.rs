//! First-order update of the top-k generalized eigen-pairs when the Laplacian
//! and degree matrices change by sparse `(ΔL, ΔD)`.
//!
//! For a D-orthonormal pair `(λ_i, a_i)`:
//!
//! ```text
//! Δλ_i  = a_i' ΔL a_i − λ_i a_i' ΔD a_i
//! α_ij  = (a_j' ΔL a_i − λ_i a_j' ΔD a_i) / (λ_i − λ_j)      j ≠ i
//! α_ii  = −½ a_i' ΔD a_i
//! Δa_i  = Σ_j α_ij a_j
//! ```
//!
//! Every quadratic form only touches rows in the support of the deltas, so one
//! update costs `O(k (nnz(ΔL) + nnz(ΔD)) + k² n)` plus the residual report.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::LaplacianPair;
use crate::sparse::{CsrMatrix, SparseDiagonal};
use crate::spectral::{d_orthonormalize, EigenPair, SpectralState};

/// Tolerance on `a' D a = 1` below which the normalized formulas are used.
pub const NORMALIZATION_TOL: f64 = 1e-8;
/// Relative eigen-gap below which a coupling term is dropped.
pub const DEFAULT_GAP_FACTOR: f64 = 1e-6;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PerturbOptions {
    /// Absolute gap tolerance; `None` means `1e-6 * max(1, λ_max)`.
    pub gap_tol: Option<f64>,
}

impl PerturbOptions {
    pub fn gap_tol_for(&self, values: &[f64]) -> f64 {
        self.gap_tol.unwrap_or_else(|| {
            let top = values.iter().cloned().fold(1.0f64, f64::max);
            DEFAULT_GAP_FACTOR * top
        })
    }
}

/// `alpha[(i, p)]` is the weight of old eigenvector `p` in `Δa_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct Weights {
    pub alpha: DMatrix<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairReport {
    pub delta_value: f64,
    pub delta_vector_norm: f64,
    /// `‖L' a − λ' D' a‖₂` after the update, on the new system.
    pub residual: f64,
    /// `min_j |λ_i − λ_j|` over the other stored pairs (before the update).
    pub gap_margin: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PerturbReport {
    pub pairs: Vec<PairReport>,
    /// Pairs for which the small-gap guard zeroed at least one coupling.
    pub flags: Vec<usize>,
}

impl PerturbReport {
    pub fn max_residual(&self) -> f64 {
        self.pairs.iter().map(|p| p.residual).fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EigenvectorDelta {
    pub delta: Vec<f64>,
    /// Row `i` of the weight matrix.
    pub weights: Vec<f64>,
    /// Partners `j` whose coupling the gap guard dropped.
    pub flagged: Vec<usize>,
}

fn check_dims(n: usize, dlap: &CsrMatrix, ddeg: &SparseDiagonal) -> Result<()> {
    if dlap.shape() != (n, n) || ddeg.dim() != n {
        return Err(Error::DimensionMismatch {
            context: "perturbation",
            expected: format!("{n}x{n}"),
            actual: format!("ΔL {:?}, ΔD {}", dlap.shape(), ddeg.dim()),
        });
    }
    Ok(())
}

/// Eigenvalue change for a pair that is D-orthonormal under the old `D`.
pub fn delta_eigenvalue(pair: &EigenPair, dlap: &CsrMatrix, ddeg: &SparseDiagonal) -> Result<f64> {
    check_dims(pair.vector.len(), dlap, ddeg)?;
    let a = &pair.vector;
    Ok(dlap.quad_form(a, a) - pair.value * ddeg.quad_form(a, a))
}

/// Eigenvalue change without assuming `a' D a = 1`: the numerator of the
/// normalized formula divided by `a' D a`.
pub fn delta_eigenvalue_general(
    pair: &EigenPair,
    deg: &[f64],
    dlap: &CsrMatrix,
    ddeg: &SparseDiagonal,
) -> Result<f64> {
    let num = delta_eigenvalue(pair, dlap, ddeg)?;
    let a = &pair.vector;
    let den: f64 = a.iter().zip(deg).map(|(x, d)| x * d * x).sum();
    Ok(num / den)
}

/// Rows touched by either delta, ascending.
fn support(dlap: &CsrMatrix, ddeg: &SparseDiagonal) -> Vec<usize> {
    let mut rows = dlap.nonempty_rows();
    rows.extend(ddeg.entries().iter().map(|e| e.0));
    rows.sort_unstable();
    rows.dedup();
    rows
}

/// `z_i = ΔL a_i − λ_i ΔD a_i` restricted to `rows`.
fn forcing(rows: &[usize], a: &[f64], lambda: f64, dlap: &CsrMatrix, ddeg: &SparseDiagonal) -> Vec<f64> {
    rows.iter()
        .map(|&r| {
            let (idx, vals) = dlap.row(r);
            let la: f64 = idx.iter().zip(vals).map(|(&c, &v)| v * a[c]).sum();
            la - lambda * ddeg.get(r) * a[r]
        })
        .collect()
}

/// Coupling matrix `c[(j, i)] = a_j' ΔL a_i − λ_i a_j' ΔD a_i`.
fn couplings(pairs: &[EigenPair], dlap: &CsrMatrix, ddeg: &SparseDiagonal) -> DMatrix<f64> {
    let k = pairs.len();
    let rows = support(dlap, ddeg);
    let mut c = DMatrix::zeros(k, k);
    for (i, pi) in pairs.iter().enumerate() {
        let z = forcing(&rows, &pi.vector, pi.value, dlap, ddeg);
        for (j, pj) in pairs.iter().enumerate() {
            c[(j, i)] = rows.iter().zip(&z).map(|(&r, zr)| pj.vector[r] * zr).sum();
        }
    }
    c
}

fn weight_row(
    pairs: &[EigenPair],
    i: usize,
    coupling_col: impl Fn(usize) -> f64,
    diag: f64,
    gap_tol: f64,
) -> (Vec<f64>, Vec<usize>) {
    let li = pairs[i].value;
    let mut flagged = Vec::new();
    let row = (0..pairs.len())
        .map(|j| {
            if j == i {
                return diag;
            }
            let gap = li - pairs[j].value;
            if gap.abs() < gap_tol {
                flagged.push(j);
                0.0
            } else {
                coupling_col(j) / gap
            }
        })
        .collect();
    (row, flagged)
}

/// `Δa_i` expanded in the stored eigenvectors, with its weight row.
pub fn delta_eigenvector(
    state: &SpectralState,
    i: usize,
    dlap: &CsrMatrix,
    ddeg: &SparseDiagonal,
    opts: &PerturbOptions,
) -> Result<EigenvectorDelta> {
    let k = state.k();
    if i >= k {
        return Err(Error::IndexOutOfRange { index: i, k });
    }
    check_dims(state.n(), dlap, ddeg)?;
    let pairs = &state.pairs;
    let rows = support(dlap, ddeg);
    let z = forcing(&rows, &pairs[i].vector, pairs[i].value, dlap, ddeg);
    let ai = &pairs[i].vector;
    let diag = -0.5 * ddeg.quad_form(ai, ai);
    let gap_tol = opts.gap_tol_for(&state.values());
    let (weights, flagged) = weight_row(
        pairs,
        i,
        |j| rows.iter().zip(&z).map(|(&r, zr)| pairs[j].vector[r] * zr).sum(),
        diag,
        gap_tol,
    );
    let mut delta = vec![0.0; state.n()];
    for (p, &w) in weights.iter().enumerate() {
        if w != 0.0 {
            delta.iter_mut().zip(&pairs[p].vector).for_each(|(d, x)| *d += w * x);
        }
    }
    Ok(EigenvectorDelta {
        delta,
        weights,
        flagged,
    })
}

/// Full weight matrix and eigenvalue changes for every stored pair.
pub fn weights_and_deltas(
    state: &SpectralState,
    dlap: &CsrMatrix,
    ddeg: &SparseDiagonal,
    opts: &PerturbOptions,
) -> Result<(Weights, Vec<f64>, Vec<Vec<usize>>)> {
    check_dims(state.n(), dlap, ddeg)?;
    let pairs = &state.pairs;
    let k = pairs.len();
    let c = couplings(pairs, dlap, ddeg);
    let gap_tol = opts.gap_tol_for(&state.values());
    let deg = &state.laplacian.deg;
    let mut alpha = DMatrix::zeros(k, k);
    let mut dlambda = Vec::with_capacity(k);
    let mut flagged = Vec::with_capacity(k);
    for i in 0..k {
        let ai = &pairs[i].vector;
        let norm: f64 = ai.iter().zip(deg).map(|(x, d)| x * d * x).sum();
        let dl = if (norm - 1.0).abs() <= NORMALIZATION_TOL {
            c[(i, i)]
        } else {
            c[(i, i)] / norm
        };
        dlambda.push(dl);
        let (row, f) = weight_row(pairs, i, |j| c[(j, i)], -0.5 * ddeg.quad_form(ai, ai), gap_tol);
        for (p, w) in row.into_iter().enumerate() {
            alpha[(i, p)] = w;
        }
        flagged.push(f);
    }
    Ok((Weights { alpha }, dlambda, flagged))
}

/// One online step for one branch: update all pairs, re-D-orthonormalize under
/// the new degrees, and re-sort ascending.
pub fn update_state(
    state: &SpectralState,
    dlap: &CsrMatrix,
    ddeg: &SparseDiagonal,
    new_pair: Arc<LaplacianPair>,
    opts: &PerturbOptions,
) -> Result<(SpectralState, PerturbReport)> {
    let n = state.n();
    let k = state.k();
    check_dims(n, dlap, ddeg)?;
    if new_pair.n() != n {
        return Err(Error::DimensionMismatch {
            context: "update_state",
            expected: n.to_string(),
            actual: new_pair.n().to_string(),
        });
    }
    let values = state.values();
    let gap_margin: Vec<f64> = (0..k)
        .map(|i| {
            (0..k)
                .filter(|&j| j != i)
                .map(|j| (values[i] - values[j]).abs())
                .fold(f64::INFINITY, f64::min)
        })
        .collect();

    if dlap.is_empty() && ddeg.is_empty() {
        let next = SpectralState {
            pairs: state.pairs.clone(),
            laplacian: new_pair,
            diagnostics: state.diagnostics.clone(),
        };
        let residuals = next.residuals();
        let report = PerturbReport {
            pairs: (0..k)
                .map(|i| PairReport {
                    delta_value: 0.0,
                    delta_vector_norm: 0.0,
                    residual: residuals[i],
                    gap_margin: gap_margin[i],
                })
                .collect(),
            flags: Vec::new(),
        };
        return Ok((next, report));
    }

    let (weights, dlambda, flagged) = weights_and_deltas(state, dlap, ddeg, opts)?;
    let flags: Vec<usize> = (0..k).filter(|&i| !flagged[i].is_empty()).collect();
    if flags.len() * 2 > k {
        return Err(Error::RefreshRequired(format!(
            "{} of {k} pairs hit the small-gap guard",
            flags.len()
        )));
    }

    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut delta_norms = Vec::with_capacity(k);
    for i in 0..k {
        let mut delta = vec![0.0; n];
        for p in 0..k {
            let w = weights.alpha[(i, p)];
            if w != 0.0 {
                delta.iter_mut().zip(&state.pairs[p].vector).for_each(|(d, x)| *d += w * x);
            }
        }
        delta_norms.push(delta.iter().map(|x| x * x).sum::<f64>().sqrt());
        vectors.push(state.pairs[i].vector.iter().zip(&delta).map(|(a, d)| a + d).collect());
    }
    d_orthonormalize(&mut vectors, &new_pair.deg).map_err(|e| match e {
        Error::DegenerateBasis { index } => {
            Error::RefreshRequired(format!("updated basis is degenerate at pair {index}"))
        }
        other => other,
    })?;

    let mut order: Vec<usize> = (0..k).collect();
    let new_values: Vec<f64> = values.iter().zip(&dlambda).map(|(l, d)| l + d).collect();
    order.sort_by(|&a, &b| new_values[a].total_cmp(&new_values[b]));

    let pairs: Vec<EigenPair> = order
        .iter()
        .map(|&i| EigenPair {
            value: new_values[i],
            vector: std::mem::take(&mut vectors[i]),
        })
        .collect();
    let next = SpectralState {
        pairs,
        laplacian: new_pair,
        diagnostics: state.diagnostics.clone(),
    };
    let residuals = next.residuals();
    let report = PerturbReport {
        pairs: order
            .iter()
            .enumerate()
            .map(|(pos, &i)| PairReport {
                delta_value: dlambda[i],
                delta_vector_norm: delta_norms[i],
                residual: residuals[pos],
                gap_margin: gap_margin[i],
            })
            .collect(),
        flags: flags
            .iter()
            .map(|&i| order.iter().position(|&o| o == i).expect("permutation"))
            .collect(),
    };
    Ok((next, report))
}

#[cfg(test)]
mod tests;
