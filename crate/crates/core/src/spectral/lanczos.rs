//! Thick-restart Lanczos with full reorthogonalization for the largest
//! eigenvalues of a symmetric operator, restricted to the orthogonal
//! complement of a set of known (deflated) eigenvectors.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub(crate) trait SymmetricOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], out: &mut [f64]);
}

#[derive(Clone, Debug)]
pub(crate) struct LanczosOptions {
    pub nev: usize,
    pub ncv: usize,
    pub tol: f64,
    pub max_restarts: usize,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub(crate) struct LanczosOutput {
    /// Ritz values, descending.
    pub values: Vec<f64>,
    /// Ritz vectors, one per value, unit 2-norm.
    pub vectors: Vec<Vec<f64>>,
    pub restarts: usize,
    pub matvecs: usize,
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Removes the components of `w` along `deflate` and `basis` (two classical
/// Gram-Schmidt passes). Returns the accumulated coefficients on `basis`.
fn orthogonalize(w: &mut [f64], deflate: &[Vec<f64>], basis: &[Vec<f64>]) -> Vec<f64> {
    let mut coeffs = vec![0.0; basis.len()];
    for _ in 0..2 {
        for u in deflate {
            let c = dot(u, w);
            axpy(-c, u, w);
        }
        for (j, v) in basis.iter().enumerate() {
            let c = dot(v, w);
            coeffs[j] += c;
            axpy(-c, v, w);
        }
    }
    coeffs
}

/// Largest `opts.nev` eigenpairs of `op` on the complement of `deflate`
/// (which must be orthonormal).
pub(crate) fn largest_eigenpairs(
    op: &dyn SymmetricOperator,
    deflate: &[Vec<f64>],
    opts: &LanczosOptions,
) -> Result<LanczosOutput> {
    let n = op.dim();
    let space = n - deflate.len();
    let nev = opts.nev;
    assert!(nev >= 1 && nev <= space, "nev must fit in the deflated space");
    let ncv = opts.ncv.clamp(nev + 1, space.max(nev + 1)).min(space);
    let keep = if ncv == space {
        nev
    } else {
        (nev + (ncv - nev) / 2).min(ncv - 1)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut random_vector = |basis: &[Vec<f64>]| -> Option<Vec<f64>> {
        for _ in 0..5 {
            let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let before = norm(&v);
            orthogonalize(&mut v, deflate, basis);
            let after = norm(&v);
            if after > 1e-8 * before {
                v.iter_mut().for_each(|x| *x /= after);
                return Some(v);
            }
        }
        None
    };

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(ncv);
    // Projected matrix V' M V, kept symmetric and dense.
    let mut h = DMatrix::<f64>::zeros(ncv, ncv);
    let mut resid = random_vector(&basis).expect("deflated space is non-empty");
    let mut beta = 1.0;
    let mut w = vec![0.0; n];
    let mut restarts = 0;
    let mut matvecs = 0;
    let mut op_scale: f64 = 0.0;

    loop {
        // Expand the Krylov basis up to ncv vectors.
        while basis.len() < ncv {
            let v = if beta > 1e-10 * op_scale.max(f64::MIN_POSITIVE) {
                let mut v = resid.clone();
                v.iter_mut().for_each(|x| *x /= beta);
                v
            } else {
                // Invariant subspace found: continue with a fresh direction.
                match random_vector(&basis) {
                    Some(v) => v,
                    None => break,
                }
            };
            op.apply(&v, &mut w);
            matvecs += 1;
            basis.push(v);
            let j = basis.len() - 1;
            let coeffs = orthogonalize(&mut w, deflate, &basis);
            for (i, &c) in coeffs.iter().enumerate() {
                h[(i, j)] = c;
                h[(j, i)] = c;
            }
            op_scale = op_scale.max(coeffs[j].abs());
            beta = norm(&w);
            op_scale = op_scale.max(beta);
            std::mem::swap(&mut resid, &mut w);
        }

        let m = basis.len();
        let hm = h.view((0, 0), (m, m)).into_owned();
        let eig = SymmetricEigen::new(hm);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

        let scale = op_scale.max(1.0);
        let want = nev.min(m);
        let mut worst = 0.0f64;
        let mut converged = 0;
        for &idx in order.iter().take(want) {
            let r = (beta * eig.eigenvectors[(m - 1, idx)]).abs();
            worst = worst.max(r);
            if r <= opts.tol * scale {
                converged += 1;
            }
        }
        let exhausted = m == space || m < ncv;
        if converged == want || exhausted {
            let values = order.iter().take(want).map(|&i| eig.eigenvalues[i]).collect();
            let vectors = order
                .iter()
                .take(want)
                .map(|&i| combine(&basis, eig.eigenvectors.column(i).as_slice()))
                .collect();
            return Ok(LanczosOutput {
                values,
                vectors,
                restarts,
                matvecs,
            });
        }
        if restarts >= opts.max_restarts {
            return Err(Error::NotConverged {
                restarts,
                converged,
                wanted: nev,
                residual: worst,
            });
        }
        restarts += 1;

        // Thick restart: keep the best `keep` Ritz vectors. Their residuals are
        // all parallel to `resid`, so the expansion continues from it.
        let kept: Vec<Vec<f64>> = order
            .iter()
            .take(keep)
            .map(|&i| combine(&basis, eig.eigenvectors.column(i).as_slice()))
            .collect();
        h.fill(0.0);
        for (p, &i) in order.iter().take(keep).enumerate() {
            h[(p, p)] = eig.eigenvalues[i];
        }
        basis = kept;
        // Re-orthogonalize the residual against the rotated basis to limit drift.
        orthogonalize(&mut resid, deflate, &basis);
        beta = norm(&resid);
    }
}

fn combine(basis: &[Vec<f64>], coeffs: &[f64]) -> Vec<f64> {
    let n = basis[0].len();
    let mut out = vec![0.0; n];
    for (v, &c) in basis.iter().zip(coeffs) {
        axpy(c, v, &mut out);
    }
    out
}
