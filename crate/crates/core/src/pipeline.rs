//! Two-branch embedding run: an offline solve on the first snapshot, then one
//! perturbation update per delta, with a full re-solve whenever the refresh
//! policy fires.

use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::consensus::{fuse, ConsensusProjection};
use crate::error::{Error, Result};
use crate::graph::{
    apply_delta, build_laplacian, build_similarity, delta_laplacian, laplacian_change, similarity_delta, Delta,
    LaplacianPair, Snapshot,
};
use crate::perturb::{update_state, PerturbOptions, PerturbReport};
use crate::sparse::{CsrMatrix, SparseDiagonal};
use crate::spectral::{embedding_matrix, solve_topk, EigenPair, SolveDiagnostics, SpectralState};

pub const CHECKPOINT_VERSION: u32 = 1;
pub const DEFAULT_DEGREE_FLOOR: f64 = 1e-8;
/// Auto residual threshold as a fraction of `‖L‖_F`.
pub const AUTO_RESIDUAL_FACTOR: f64 = 1e-3;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "value")]
pub enum ResidualThreshold {
    /// `1e-3 · ‖L‖_F` of each branch.
    #[default]
    Auto,
    Absolute(f64),
    Never,
}

impl ResidualThreshold {
    fn limit(&self, lap: &CsrMatrix) -> f64 {
        match *self {
            ResidualThreshold::Auto => AUTO_RESIDUAL_FACTOR * lap.frobenius_norm(),
            ResidualThreshold::Absolute(t) => t,
            ResidualThreshold::Never => f64::INFINITY,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub k: usize,
    pub l: usize,
    pub gap_tol: Option<f64>,
    pub ridge: Option<f64>,
    pub refresh_every: Option<usize>,
    pub refresh_residual: ResidualThreshold,
    pub seed: u64,
    /// Keep only the `s` strongest similarities per node.
    pub sparsify_top: Option<usize>,
    pub degree_floor: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            k: 10,
            l: 10,
            gap_tol: None,
            ridge: None,
            refresh_every: None,
            refresh_residual: ResidualThreshold::Auto,
            seed: 0,
            sparsify_top: None,
            degree_floor: DEFAULT_DEGREE_FLOOR,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidInput("k must be at least 1".into()));
        }
        if self.l == 0 || self.l > 2 * self.k {
            return Err(Error::InvalidInput(format!("l = {} must lie in 1..={}", self.l, 2 * self.k)));
        }
        if self.refresh_every == Some(0) {
            return Err(Error::InvalidInput("refresh_every must be positive".into()));
        }
        if !(self.degree_floor > 0.0 && self.degree_floor.is_finite()) {
            return Err(Error::InvalidInput("degree_floor must be positive".into()));
        }
        if let ResidualThreshold::Absolute(t) = self.refresh_residual {
            if !(t >= 0.0) {
                return Err(Error::InvalidInput("refresh_residual must be non-negative".into()));
            }
        }
        Ok(())
    }

    fn perturb_options(&self) -> PerturbOptions {
        PerturbOptions { gap_tol: self.gap_tol }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefreshReason {
    Schedule,
    Residual,
    SmallGap,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BranchDrift {
    /// Sum over online steps of the largest post-update residual.
    pub cumulative_residual: f64,
    pub last_residual: f64,
    pub flagged_pairs: usize,
    /// Nodes whose degree sits at the floor.
    pub floored_nodes: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DriftStats {
    pub network: BranchDrift,
    pub attributes: BranchDrift,
    pub steps_since_refresh: usize,
    pub refreshes: Vec<(usize, RefreshReason)>,
}

/// What the most recent step did.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub step: usize,
    pub refreshed: Option<RefreshReason>,
    pub network: Option<PerturbReport>,
    pub attributes: Option<PerturbReport>,
}

#[derive(Clone, Debug)]
pub struct EmbeddingRun {
    pub config: RunConfig,
    pub snapshot: Snapshot,
    pub network: SpectralState,
    pub attributes: SpectralState,
    pub projection: ConsensusProjection,
    /// `n x l` consensus embedding.
    pub embedding: DMatrix<f64>,
    pub step: usize,
    pub drift: DriftStats,
    pub last_report: Option<StepReport>,
}

fn floored(base: &CsrMatrix, floor: f64) -> Result<(LaplacianPair, usize)> {
    let mut pair = build_laplacian(base)?;
    let hit = pair.floor_degrees(floor).len();
    Ok((pair, hit))
}

fn count_floored(pair: &LaplacianPair, floor: f64) -> usize {
    pair.deg.iter().filter(|&&d| d <= floor).count()
}

fn attribute_seed(seed: u64) -> u64 {
    seed.wrapping_add(1)
}

fn solve_pair(
    net: LaplacianPair,
    attr: LaplacianPair,
    config: &RunConfig,
) -> Result<(SpectralState, SpectralState)> {
    let (net, attr) = (Arc::new(net), Arc::new(attr));
    let (a, b) = rayon::join(
        || solve_topk(&net, config.k, config.seed),
        || solve_topk(&attr, config.k, attribute_seed(config.seed)),
    );
    Ok((a?, b?))
}

fn fuse_states(
    net: &SpectralState,
    attr: &SpectralState,
    config: &RunConfig,
) -> Result<(ConsensusProjection, DMatrix<f64>)> {
    let (proj, emb) = fuse(&embedding_matrix(net), &embedding_matrix(attr), config.l, config.ridge)?;
    Ok((proj, emb.y))
}

/// Offline solve of both branches on `snapshot` and their fusion.
pub fn init_offline(snapshot: Snapshot, config: RunConfig) -> Result<EmbeddingRun> {
    config.validate()?;
    let (net_pair, net_floored) = floored(snapshot.adjacency(), config.degree_floor)?;
    let w = build_similarity(&snapshot, config.sparsify_top)?;
    let (attr_pair, attr_floored) = floored(&w.w, config.degree_floor)?;
    log::debug!(
        "offline solve: n = {}, nnz(A) = {}, nnz(W) = {}",
        snapshot.n(),
        snapshot.adjacency().nnz(),
        w.w.nnz()
    );
    let (network, attributes) = solve_pair(net_pair, attr_pair, &config)?;
    let (projection, embedding) = fuse_states(&network, &attributes, &config)?;
    let mut drift = DriftStats::default();
    drift.network.floored_nodes = net_floored;
    drift.attributes.floored_nodes = attr_floored;
    Ok(EmbeddingRun {
        config,
        snapshot,
        network,
        attributes,
        projection,
        embedding,
        step: 0,
        drift,
        last_report: None,
    })
}

/// `(new pair, ΔD, ΔL)` for one branch given its raw weight change.
fn branch_change(
    old: &LaplacianPair,
    dbase: &CsrMatrix,
    floor: f64,
) -> Result<(LaplacianPair, SparseDiagonal, CsrMatrix)> {
    let dlap = laplacian_change(dbase)?;
    let (pair, ddeg) = old.advance(&dlap, floor)?;
    Ok((pair, ddeg, dlap))
}

impl EmbeddingRun {
    pub fn n(&self) -> usize {
        self.snapshot.n()
    }

    /// Applies one delta and returns the advanced run.
    pub fn step_online(&self, delta: &Delta) -> Result<EmbeddingRun> {
        let config = &self.config;
        let next_snapshot = apply_delta(&self.snapshot, delta)?;
        let next_step = self.step + 1;

        if let Some(r) = config.refresh_every {
            if self.drift.steps_since_refresh + 1 >= r {
                return self.refresh(next_snapshot, next_step, RefreshReason::Schedule, None, None);
            }
        }

        let floor = config.degree_floor;
        let (net_pair, net_dd, net_dl) = branch_change(&self.network.laplacian, delta.adjacency(), floor)?;
        let (attr_pair, attr_dd, attr_dl) = match config.sparsify_top {
            None => {
                let dw = similarity_delta(&self.snapshot, &next_snapshot, &delta.touched_attribute_rows())?;
                branch_change(&self.attributes.laplacian, &dw, floor)?
            }
            Some(_) => {
                let w = build_similarity(&next_snapshot, config.sparsify_top)?;
                let (pair, _) = floored(&w.w, floor)?;
                let (dd, dl) = delta_laplacian(&self.attributes.laplacian, &pair)?;
                (pair, dd, dl)
            }
        };
        let net_floored = count_floored(&net_pair, floor);
        let attr_floored = count_floored(&attr_pair, floor);
        let opts = config.perturb_options();
        let net_pair = Arc::new(net_pair);
        let attr_pair = Arc::new(attr_pair);
        let (net, attr) = rayon::join(
            || update_state(&self.network, &net_dl, &net_dd, Arc::clone(&net_pair), &opts),
            || update_state(&self.attributes, &attr_dl, &attr_dd, Arc::clone(&attr_pair), &opts),
        );
        let (network, net_report) = match net {
            Err(Error::RefreshRequired(why)) => {
                log::info!("step {next_step}: network branch needs a refresh: {why}");
                return self.refresh(next_snapshot, next_step, RefreshReason::SmallGap, None, None);
            }
            other => other?,
        };
        let (attributes, attr_report) = match attr {
            Err(Error::RefreshRequired(why)) => {
                log::info!("step {next_step}: attribute branch needs a refresh: {why}");
                return self.refresh(next_snapshot, next_step, RefreshReason::SmallGap, None, None);
            }
            other => other?,
        };

        let net_res = net_report.max_residual();
        let attr_res = attr_report.max_residual();
        if net_res > config.refresh_residual.limit(&net_pair.lap)
            || attr_res > config.refresh_residual.limit(&attr_pair.lap)
        {
            log::info!("step {next_step}: residuals {net_res:e} / {attr_res:e} over threshold, refreshing");
            return self.refresh(
                next_snapshot,
                next_step,
                RefreshReason::Residual,
                Some(net_report),
                Some(attr_report),
            );
        }

        let (projection, embedding) = fuse_states(&network, &attributes, config)?;
        let mut drift = self.drift.clone();
        drift.steps_since_refresh += 1;
        for (b, res, rep, fl) in [
            (&mut drift.network, net_res, &net_report, net_floored),
            (&mut drift.attributes, attr_res, &attr_report, attr_floored),
        ] {
            b.cumulative_residual += res;
            b.last_residual = res;
            b.flagged_pairs += rep.flags.len();
            b.floored_nodes = fl;
        }
        Ok(EmbeddingRun {
            config: config.clone(),
            snapshot: next_snapshot,
            network,
            attributes,
            projection,
            embedding,
            step: next_step,
            drift,
            last_report: Some(StepReport {
                step: next_step,
                refreshed: None,
                network: Some(net_report),
                attributes: Some(attr_report),
            }),
        })
    }

    fn refresh(
        &self,
        snapshot: Snapshot,
        step: usize,
        reason: RefreshReason,
        network: Option<PerturbReport>,
        attributes: Option<PerturbReport>,
    ) -> Result<EmbeddingRun> {
        let mut run = init_offline(snapshot, self.config.clone())?;
        let mut drift = self.drift.clone();
        drift.steps_since_refresh = 0;
        drift.refreshes.push((step, reason));
        drift.network.last_residual = run.network.residuals().into_iter().fold(0.0, f64::max);
        drift.attributes.last_residual = run.attributes.residuals().into_iter().fold(0.0, f64::max);
        drift.network.floored_nodes = run.drift.network.floored_nodes;
        drift.attributes.floored_nodes = run.drift.attributes.floored_nodes;
        run.drift = drift;
        run.step = step;
        run.last_report = Some(StepReport {
            step,
            refreshed: Some(reason),
            network,
            attributes,
        });
        Ok(run)
    }

    /// Re-fuses the current branch states at a different consensus dimension.
    pub fn refuse(&self, l: usize) -> Result<(ConsensusProjection, DMatrix<f64>)> {
        let config = RunConfig { l, ..self.config.clone() };
        config.validate()?;
        fuse_states(&self.network, &self.attributes, &config)
    }

    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(&Checkpoint::from_run(self))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load_checkpoint(path: &Path) -> Result<EmbeddingRun> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Checkpoint::from_json(&text)?.into_run()
    }
}

/// Hex sha-256 over the shapes and CSR arrays of both matrices.
pub fn snapshot_digest(snapshot: &Snapshot) -> String {
    let mut h = Sha256::new();
    for m in [snapshot.adjacency(), snapshot.attributes()] {
        h.update((m.nrows() as u64).to_le_bytes());
        h.update((m.ncols() as u64).to_le_bytes());
        for (r, c, v) in m.iter() {
            h.update((r as u64).to_le_bytes());
            h.update((c as u64).to_le_bytes());
            h.update(v.to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct StoredState {
    pairs: Vec<EigenPair>,
    laplacian: LaplacianPair,
    diagnostics: SolveDiagnostics,
}

impl StoredState {
    fn of(s: &SpectralState) -> Self {
        StoredState {
            pairs: s.pairs.clone(),
            laplacian: (*s.laplacian).clone(),
            diagnostics: s.diagnostics.clone(),
        }
    }

    fn into_state(self, n: usize, k: usize) -> Result<SpectralState> {
        if self.laplacian.n() != n || self.pairs.len() != k || self.pairs.iter().any(|p| p.vector.len() != n) {
            return Err(Error::CorruptCheckpoint("spectral state does not match the snapshot".into()));
        }
        Ok(SpectralState {
            pairs: self.pairs,
            laplacian: Arc::new(self.laplacian),
            diagnostics: self.diagnostics,
        })
    }
}

/// Serialized form of an [`EmbeddingRun`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Checkpoint {
    version: u32,
    config: RunConfig,
    step: usize,
    snapshot_digest: String,
    snapshot: Snapshot,
    network: StoredState,
    attributes: StoredState,
    projection: ConsensusProjection,
    embedding: DMatrix<f64>,
    drift: DriftStats,
    last_report: Option<StepReport>,
}

impl Checkpoint {
    pub fn from_run(run: &EmbeddingRun) -> Self {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            config: run.config.clone(),
            step: run.step,
            snapshot_digest: snapshot_digest(&run.snapshot),
            snapshot: run.snapshot.clone(),
            network: StoredState::of(&run.network),
            attributes: StoredState::of(&run.attributes),
            projection: run.projection.clone(),
            embedding: run.embedding.clone(),
            drift: run.drift.clone(),
            last_report: run.last_report.clone(),
        }
    }

    /// Parses a checkpoint, checking the version before anything else.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)
            .map_err(|e| Error::CorruptCheckpoint(e.to_string()))?;
        let found = value
            .get("version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| Error::CorruptCheckpoint("missing version".into()))?;
        if found != CHECKPOINT_VERSION as u64 {
            return Err(Error::CheckpointVersion {
                found: found.min(u32::MAX as u64) as u32,
                expected: CHECKPOINT_VERSION,
            });
        }
        serde_json::from_value(value).map_err(|e| Error::CorruptCheckpoint(e.to_string()))
    }

    pub fn into_run(self) -> Result<EmbeddingRun> {
        if snapshot_digest(&self.snapshot) != self.snapshot_digest {
            return Err(Error::CorruptCheckpoint("snapshot digest mismatch".into()));
        }
        self.config.validate()?;
        let n = self.snapshot.n();
        let k = self.config.k;
        if self.embedding.shape() != (n, self.config.l) || self.projection.p.shape() != (2 * k, self.config.l) {
            return Err(Error::CorruptCheckpoint("embedding shape does not match the config".into()));
        }
        Ok(EmbeddingRun {
            network: self.network.into_state(n, k)?,
            attributes: self.attributes.into_state(n, k)?,
            config: self.config,
            snapshot: self.snapshot,
            projection: self.projection,
            embedding: self.embedding,
            step: self.step,
            drift: self.drift,
            last_report: self.last_report,
        })
    }
}

#[cfg(test)]
mod tests;
