//! Attributed-network snapshots, sparse deltas between them, the cosine
//! similarity graph over attributes, and degree/Laplacian assembly.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::{CsrMatrix, SparseDiagonal};

/// Asymmetry tolerated when assembling a Laplacian.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// One time step of an attributed network: symmetric non-negative adjacency
/// with zero diagonal, and a non-negative `n x d` attribute matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    adjacency: CsrMatrix,
    attributes: CsrMatrix,
}

impl Snapshot {
    pub fn new(adjacency: CsrMatrix, attributes: CsrMatrix) -> Result<Self> {
        let n = adjacency.nrows();
        if n == 0 {
            return Err(Error::InvalidInput("snapshot needs at least one node".into()));
        }
        if adjacency.ncols() != n {
            return Err(Error::DimensionMismatch {
                context: "adjacency",
                expected: format!("{n}x{n}"),
                actual: format!("{}x{}", n, adjacency.ncols()),
            });
        }
        if attributes.nrows() != n {
            return Err(Error::DimensionMismatch {
                context: "attribute rows",
                expected: n.to_string(),
                actual: attributes.nrows().to_string(),
            });
        }
        check_entries(&adjacency, "adjacency")?;
        check_entries(&attributes, "attributes")?;
        for (r, c, v) in adjacency.iter() {
            if r == c {
                return Err(Error::NonzeroDiagonal { node: r, value: v });
            }
        }
        // Exact symmetry: the stored weights must mirror bit-for-bit.
        adjacency.check_symmetric(0.0)?;
        Ok(Snapshot {
            adjacency,
            attributes,
        })
    }

    pub fn n(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn d(&self) -> usize {
        self.attributes.ncols()
    }

    pub fn adjacency(&self) -> &CsrMatrix {
        &self.adjacency
    }

    pub fn attributes(&self) -> &CsrMatrix {
        &self.attributes
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        self.adjacency.nnz() / 2
    }
}

fn check_entries(m: &CsrMatrix, context: &'static str) -> Result<()> {
    for (row, col, value) in m.iter() {
        if !value.is_finite() {
            return Err(Error::NonFinite {
                context,
                row,
                col,
                value,
            });
        }
        if value < 0.0 {
            return Err(Error::NegativeEntry {
                context,
                row,
                col,
                value,
            });
        }
    }
    Ok(())
}

/// Change between consecutive snapshots. Entries may be negative.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Delta {
    adjacency: CsrMatrix,
    attributes: CsrMatrix,
}

impl Delta {
    pub fn new(adjacency: CsrMatrix, attributes: CsrMatrix) -> Result<Self> {
        let n = adjacency.nrows();
        if adjacency.ncols() != n || attributes.nrows() != n {
            return Err(Error::DimensionMismatch {
                context: "delta",
                expected: format!("{n}x{n} and {n}xd"),
                actual: format!(
                    "{:?} and {:?}",
                    adjacency.shape(),
                    attributes.shape()
                ),
            });
        }
        for (r, c, v) in adjacency.iter().chain(attributes.iter()) {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    context: "delta",
                    row: r,
                    col: c,
                    value: v,
                });
            }
        }
        for (r, c, v) in adjacency.iter() {
            if r == c {
                return Err(Error::NonzeroDiagonal { node: r, value: v });
            }
        }
        adjacency.check_symmetric(0.0)?;
        Ok(Delta {
            adjacency,
            attributes,
        })
    }

    pub fn empty(n: usize, d: usize) -> Self {
        Delta {
            adjacency: CsrMatrix::zeros(n, n),
            attributes: CsrMatrix::zeros(n, d),
        }
    }

    pub fn adjacency(&self) -> &CsrMatrix {
        &self.adjacency
    }

    pub fn attributes(&self) -> &CsrMatrix {
        &self.attributes
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty() && self.attributes.is_empty()
    }

    /// Nodes whose attribute row changes.
    pub fn touched_attribute_rows(&self) -> Vec<usize> {
        self.attributes.nonempty_rows()
    }
}

/// Cosine similarity graph over node attributes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityGraph {
    pub w: CsrMatrix,
}

/// Degree matrix and Laplacian `lap = deg - base` of a symmetric weight matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaplacianPair {
    pub deg: Vec<f64>,
    pub lap: CsrMatrix,
}

impl LaplacianPair {
    pub fn n(&self) -> usize {
        self.deg.len()
    }

    /// Raises every degree below `floor` to `floor`, returning the affected nodes.
    /// The Laplacian itself is left as is, so `L 1 = 0` still holds.
    pub fn floor_degrees(&mut self, floor: f64) -> Vec<usize> {
        let mut hit = Vec::new();
        for (i, d) in self.deg.iter_mut().enumerate() {
            if *d < floor {
                *d = floor;
                hit.push(i);
            }
        }
        hit
    }

    /// Applies a Laplacian change whose diagonal is the raw degree change, and
    /// returns the new pair together with the realised degree delta (which
    /// differs from the raw one only where `floor` clamps).
    pub fn advance(&self, dlap: &CsrMatrix, floor: f64) -> Result<(LaplacianPair, SparseDiagonal)> {
        let lap = self.lap.add(dlap)?;
        let mut deg = self.deg.clone();
        let mut ddeg = Vec::new();
        for r in dlap.nonempty_rows() {
            let raw = lap.get(r, r);
            let new = if raw < floor { floor } else { raw };
            ddeg.push((r, new - self.deg[r]));
            deg[r] = new;
        }
        Ok((LaplacianPair { deg, lap }, SparseDiagonal::new(self.n(), ddeg)))
    }

    /// Largest absolute row sum of the Laplacian.
    pub fn max_row_sum(&self) -> f64 {
        self.lap
            .row_sums()
            .into_iter()
            .fold(0.0, |m: f64, s| m.max(s.abs()))
    }
}

/// Pairwise cosine similarity of attribute rows with zero diagonal. All-zero
/// rows have zero similarity to everything. With `sparsify_top = Some(s)` each
/// row keeps only its `s` largest entries and the result is symmetrized by max.
pub fn build_similarity(snapshot: &Snapshot, sparsify_top: Option<usize>) -> Result<SimilarityGraph> {
    let x = snapshot.attributes();
    if x.ncols() == 0 {
        return Err(Error::NoAttributes);
    }
    check_entries(x, "attributes")?;
    if sparsify_top == Some(0) {
        return Err(Error::InvalidInput("sparsify_top must be positive".into()));
    }
    let n = x.nrows();
    let norms = row_norms(x);
    let xt = x.transpose();
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
    let mut acc = vec![0.0; n];
    let mut seen = vec![false; n];
    let mut touched = Vec::new();
    for i in 0..n {
        cosine_row(x, &xt, &norms, &norms, i, &mut acc, &mut seen, &mut touched);
        let mut row: Vec<(usize, f64)> = touched
            .drain(..)
            .map(|j| {
                seen[j] = false;
                let v = std::mem::take(&mut acc[j]);
                (j, v)
            })
            .filter(|&(j, v)| j != i && v > 0.0)
            .collect();
        if let Some(s) = sparsify_top {
            if row.len() > s {
                row.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
                row.truncate(s);
            }
        }
        rows.push(row);
    }
    let w = match sparsify_top {
        None => CsrMatrix::from_triplets(
            n,
            n,
            rows.into_iter()
                .enumerate()
                .flat_map(|(i, r)| r.into_iter().map(move |(j, v)| (i, j, v))),
        )?,
        Some(_) => {
            let mut sym: BTreeMap<(usize, usize), f64> = BTreeMap::new();
            for (i, r) in rows.into_iter().enumerate() {
                for (j, v) in r {
                    for key in [(i, j), (j, i)] {
                        let e = sym.entry(key).or_insert(0.0);
                        *e = e.max(v);
                    }
                }
            }
            CsrMatrix::from_triplets(n, n, sym.into_iter().map(|((i, j), v)| (i, j, v)))?
        }
    };
    Ok(SimilarityGraph { w })
}

fn row_norms(x: &CsrMatrix) -> Vec<f64> {
    (0..x.nrows())
        .map(|i| x.row(i).1.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect()
}

/// Accumulates `cos(X_i, Y_j)` for every `j` sharing an attribute with row `i`
/// of `x` into `acc`, recording touched `j`. `yt` is the transpose of `Y`.
#[allow(clippy::too_many_arguments)]
fn cosine_row(
    x: &CsrMatrix,
    yt: &CsrMatrix,
    x_norms: &[f64],
    y_norms: &[f64],
    i: usize,
    acc: &mut [f64],
    seen: &mut [bool],
    touched: &mut Vec<usize>,
) {
    if x_norms[i] == 0.0 {
        return;
    }
    let (attrs, vals) = x.row(i);
    for (&a, &xa) in attrs.iter().zip(vals) {
        let (nodes, yv) = yt.row(a);
        for (&j, &ya) in nodes.iter().zip(yv) {
            if !seen[j] {
                seen[j] = true;
                touched.push(j);
            }
            acc[j] += xa * ya;
        }
    }
    for &j in touched.iter() {
        let denom = x_norms[i] * y_norms[j];
        acc[j] = if denom > 0.0 {
            (acc[j] / denom).clamp(0.0, 1.0)
        } else {
            0.0
        };
    }
}

/// Exact change of the (dense, unsparsified) similarity graph when the
/// attribute rows listed in `touched` change from `old` to `new`. Only rows and
/// columns of touched nodes can change, so the cost is
/// `O(|touched| * nnz(X))` rather than a full rebuild.
pub fn similarity_delta(old: &Snapshot, new: &Snapshot, touched: &[usize]) -> Result<CsrMatrix> {
    let n = old.n();
    if new.n() != n || new.d() != old.d() {
        return Err(Error::DimensionMismatch {
            context: "similarity delta",
            expected: format!("{}x{}", n, old.d()),
            actual: format!("{}x{}", new.n(), new.d()),
        });
    }
    if old.d() == 0 {
        return Err(Error::NoAttributes);
    }
    let mut is_touched = vec![false; n];
    for &i in touched {
        is_touched[i] = true;
    }
    let (xo, xn) = (old.attributes(), new.attributes());
    let (ao, an) = (xo.transpose(), xn.transpose());
    let (no, nn) = (row_norms(xo), row_norms(xn));
    let mut acc = vec![0.0; n];
    let mut seen = vec![false; n];
    let mut list = Vec::new();
    let mut changes: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut row_of = |x: &CsrMatrix, xt: &CsrMatrix, norms: &[f64], i: usize| -> Vec<(usize, f64)> {
        cosine_row(x, xt, norms, norms, i, &mut acc, &mut seen, &mut list);
        list.drain(..)
            .map(|j| {
                seen[j] = false;
                (j, std::mem::take(&mut acc[j]))
            })
            .filter(|&(j, _)| j != i)
            .collect()
    };
    let mut sorted: Vec<usize> = touched.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    for &i in &sorted {
        let after = row_of(xn, &an, &nn, i);
        let before = row_of(xo, &ao, &no, i);
        let mut row: BTreeMap<usize, f64> = BTreeMap::new();
        for (j, v) in after {
            *row.entry(j).or_insert(0.0) += v;
        }
        for (j, v) in before {
            *row.entry(j).or_insert(0.0) -= v;
        }
        for (j, dv) in row {
            // A pair of touched nodes is visited from both ends; keep one.
            if is_touched[j] && j < i {
                continue;
            }
            if dv != 0.0 {
                changes.insert((i, j), dv);
            }
        }
    }
    CsrMatrix::symmetric_from_triplets(n, changes.into_iter().map(|((i, j), v)| (i, j, v)))
}

/// Degree vector and Laplacian of a symmetric non-negative weight matrix.
pub fn build_laplacian(base: &CsrMatrix) -> Result<LaplacianPair> {
    base.check_symmetric(SYMMETRY_TOL)?;
    let deg = base.row_sums();
    let lap = laplacian_of(base, &deg)?;
    Ok(LaplacianPair { deg, lap })
}

fn laplacian_of(base: &CsrMatrix, deg: &[f64]) -> Result<CsrMatrix> {
    let n = base.nrows();
    let diag = deg.iter().enumerate().map(|(i, &d)| (i, i, d));
    let off = base.iter().filter(|e| e.0 != e.1).map(|(r, c, v)| (r, c, -v));
    CsrMatrix::from_triplets(n, n, diag.chain(off))
}

/// Laplacian change `diag(rowsum(dW)) - dW` induced by a symmetric weight change.
pub fn laplacian_change(dbase: &CsrMatrix) -> Result<CsrMatrix> {
    let ddeg = dbase.row_sums();
    laplacian_of(dbase, &ddeg)
}

/// Returns `snapshot + delta`, rejecting any resulting negative weight.
pub fn apply_delta(snapshot: &Snapshot, delta: &Delta) -> Result<Snapshot> {
    if delta.adjacency().shape() != snapshot.adjacency().shape()
        || delta.attributes().shape() != snapshot.attributes().shape()
    {
        return Err(Error::DimensionMismatch {
            context: "apply_delta",
            expected: format!(
                "{:?} / {:?}",
                snapshot.adjacency().shape(),
                snapshot.attributes().shape()
            ),
            actual: format!(
                "{:?} / {:?}",
                delta.adjacency().shape(),
                delta.attributes().shape()
            ),
        });
    }
    let adjacency = snapshot.adjacency().add(delta.adjacency())?;
    let attributes = snapshot.attributes().add(delta.attributes())?;
    for (m, context) in [(&adjacency, "adjacency after delta"), (&attributes, "attributes after delta")] {
        if let Some((row, col, value)) = m.iter().find(|e| e.2 < 0.0) {
            return Err(Error::NegativeEntry {
                context,
                row,
                col,
                value,
            });
        }
    }
    Snapshot::new(adjacency, attributes)
}

/// `(new.deg - old.deg, new.lap - old.lap)`, both stored sparsely.
pub fn delta_laplacian(old: &LaplacianPair, new: &LaplacianPair) -> Result<(SparseDiagonal, CsrMatrix)> {
    if old.n() != new.n() {
        return Err(Error::DimensionMismatch {
            context: "delta_laplacian",
            expected: old.n().to_string(),
            actual: new.n().to_string(),
        });
    }
    let ddeg = SparseDiagonal::from_dense_diff(&new.deg, &old.deg);
    let dlap = new.lap.sub(&old.lap)?;
    Ok((ddeg, dlap))
}
