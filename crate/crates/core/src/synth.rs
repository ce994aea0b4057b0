//! Synthetic dynamic attributed networks: a stochastic block model with
//! block-correlated attributes, evolved by random edge flips and attribute
//! redraws.

use std::collections::{BTreeSet, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Delta, Snapshot};
use crate::sparse::CsrMatrix;

/// Fraction of edges and attribute entries perturbed per step in the
/// standard evolution protocol.
pub const PROTOCOL_DRIFT: f64 = 0.001;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SbmSpec {
    pub n: usize,
    pub blocks: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub attr_dim: usize,
    /// Mean shift of a node's own-block attributes over unit Gaussian noise.
    pub attr_signal: f64,
    pub drift_rate: f64,
    pub steps: usize,
    pub seed: u64,
}

impl Default for SbmSpec {
    fn default() -> Self {
        SbmSpec {
            n: 200,
            blocks: 3,
            p_in: 0.3,
            p_out: 0.05,
            attr_dim: 30,
            attr_signal: 1.0,
            drift_rate: PROTOCOL_DRIFT,
            steps: 10,
            seed: 0,
        }
    }
}

impl SbmSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(m.to_string()));
        if self.n < 2 {
            return bad("SBM needs at least two nodes");
        }
        if self.blocks == 0 || self.blocks > self.n {
            return bad("block count must be in 1..=n");
        }
        if !(0.0..=1.0).contains(&self.p_in) || !(0.0..=1.0).contains(&self.p_out) {
            return bad("edge probabilities must lie in [0, 1]");
        }
        if self.p_out > self.p_in {
            return bad("p_out must not exceed p_in");
        }
        if self.p_in == 0.0 && self.p_out == 0.0 {
            return bad("p_in = p_out = 0 gives an empty graph");
        }
        if self.attr_dim == 0 {
            return bad("attr_dim must be positive");
        }
        if !self.attr_signal.is_finite() {
            return bad("attr_signal must be finite");
        }
        if !(0.0..=1.0).contains(&self.drift_rate) {
            return bad("drift_rate must lie in [0, 1]");
        }
        Ok(())
    }

    pub fn block_of(&self, node: usize) -> usize {
        node * self.blocks / self.n
    }

    /// Exact expected undirected edge count of the initial graph.
    pub fn expected_edges(&self) -> (f64, f64) {
        let sizes: Vec<f64> = (0..self.blocks)
            .map(|b| (0..self.n).filter(|&i| self.block_of(i) == b).count() as f64)
            .collect();
        let within: f64 = sizes.iter().map(|s| s * (s - 1.0) / 2.0).sum();
        let total = self.n as f64 * (self.n as f64 - 1.0) / 2.0;
        let across = total - within;
        let mean = within * self.p_in + across * self.p_out;
        let var = within * self.p_in * (1.0 - self.p_in) + across * self.p_out * (1.0 - self.p_out);
        (mean, var)
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticStream {
    pub initial: Snapshot,
    pub deltas: Vec<Delta>,
    pub labels: Vec<usize>,
}

impl SyntheticStream {
    /// Snapshot after the first `steps` deltas.
    pub fn snapshot_at(&self, steps: usize) -> Result<Snapshot> {
        self.deltas
            .iter()
            .take(steps)
            .try_fold(self.initial.clone(), |s, d| crate::graph::apply_delta(&s, d))
    }
}

fn draw_attribute(rng: &mut ChaCha8Rng, signal: f64, own_block: bool) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    let v = z + if own_block { signal } else { 0.0 };
    v.max(0.0)
}

/// Initial SBM snapshot, `spec.steps` deltas and the block labels.
pub fn generate(spec: &SbmSpec) -> Result<SyntheticStream> {
    spec.validate()?;
    let (n, d, c) = (spec.n, spec.attr_dim, spec.blocks);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let labels: Vec<usize> = (0..n).map(|i| spec.block_of(i)).collect();

    let mut edges: BTreeSet<(usize, usize)> = BTreeSet::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let p = if labels[i] == labels[j] { spec.p_in } else { spec.p_out };
            if rng.random_bool(p) {
                edges.insert((i, j));
            }
        }
    }
    let mut x = vec![0.0; n * d];
    for i in 0..n {
        for j in 0..d {
            x[i * d + j] = draw_attribute(&mut rng, spec.attr_signal, j % c == labels[i]);
        }
    }
    let adjacency = CsrMatrix::symmetric_from_triplets(n, edges.iter().map(|&(i, j)| (i, j, 1.0)))?;
    let attributes = dense_to_csr(&x, n, d)?;
    let initial = Snapshot::new(adjacency, attributes)?;

    let mut deltas = Vec::with_capacity(spec.steps);
    for _ in 0..spec.steps {
        // drift·nnz(A) slots; each undirected pair occupies two
        let flips = (spec.drift_rate * edges.len() as f64).round() as usize;
        let mut picked: HashSet<(usize, usize)> = HashSet::new();
        let mut da = Vec::with_capacity(flips);
        while picked.len() < flips.min(n * (n - 1) / 2) {
            let i = rng.random_range(0..n);
            let j = rng.random_range(0..n);
            if i == j {
                continue;
            }
            let key = (i.min(j), i.max(j));
            if !picked.insert(key) {
                continue;
            }
            if edges.remove(&key) {
                da.push((key.0, key.1, -1.0));
            } else {
                edges.insert(key);
                da.push((key.0, key.1, 1.0));
            }
        }
        let nnz_x = x.iter().filter(|&&v| v != 0.0).count();
        let redraws = (spec.drift_rate * nnz_x as f64).round() as usize;
        let mut cells: HashSet<usize> = HashSet::new();
        let mut dx = Vec::with_capacity(redraws);
        while cells.len() < redraws.min(n * d) {
            let cell = rng.random_range(0..n * d);
            if !cells.insert(cell) {
                continue;
            }
            let (i, j) = (cell / d, cell % d);
            let new = draw_attribute(&mut rng, spec.attr_signal, j % c == labels[i]);
            let change = new - x[cell];
            x[cell] = new;
            if change != 0.0 {
                dx.push((i, j, change));
            }
        }
        deltas.push(Delta::new(
            CsrMatrix::symmetric_from_triplets(n, da)?,
            CsrMatrix::from_triplets(n, d, dx)?,
        )?);
    }
    Ok(SyntheticStream {
        initial,
        deltas,
        labels,
    })
}

fn dense_to_csr(x: &[f64], n: usize, d: usize) -> Result<CsrMatrix> {
    CsrMatrix::from_triplets(
        n,
        d,
        (0..n).flat_map(|i| (0..d).map(move |j| (i, j, x[i * d + j]))),
    )
}

/// Weighted random graph, connected through a random spanning tree, with
/// extra edges drawn independently with probability `p` and weights in
/// `[0.5, 1.5)`. Random weights keep the spectrum free of exact repeats.
pub fn random_weighted_graph(n: usize, p: f64, seed: u64) -> Result<CsrMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Vec::new();
    for i in 1..n {
        let j = rng.random_range(0..i);
        t.push((j, i, rng.random_range(0.5..1.5)));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random_bool(p) {
                t.push((i, j, rng.random_range(0.5..1.5)));
            }
        }
    }
    CsrMatrix::symmetric_from_triplets(n, t)
}
