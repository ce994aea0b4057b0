use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        actual: String,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no attributes: attribute matrix has zero columns")]
    NoAttributes,

    #[error("non-finite value {value} at ({row}, {col}) in {context}")]
    NonFinite {
        context: &'static str,
        row: usize,
        col: usize,
        value: f64,
    },

    #[error("negative value {value} at ({row}, {col}) in {context}")]
    NegativeEntry {
        context: &'static str,
        row: usize,
        col: usize,
        value: f64,
    },

    #[error("matrix is not symmetric: |M({row},{col}) - M({col},{row})| = {diff:e}")]
    Asymmetric { row: usize, col: usize, diff: f64 },

    #[error("nonzero diagonal entry {value} at node {node}")]
    NonzeroDiagonal { node: usize, value: f64 },

    #[error("k + 1 = {} exceeds node count {n}", k + 1)]
    TooManyPairs { k: usize, n: usize },

    #[error("node {node} has zero degree; floor degrees (e.g. LaplacianPair::floor_degrees) before solving")]
    ZeroDegree { node: usize },

    #[error("eigen-solver did not converge after {restarts} restarts ({converged}/{wanted} pairs, worst residual {residual:e})")]
    NotConverged {
        restarts: usize,
        converged: usize,
        wanted: usize,
        residual: f64,
    },

    #[error("degenerate basis: vector {index} is numerically dependent on its predecessors")]
    DegenerateBasis { index: usize },

    #[error("refresh required: {0}")]
    RefreshRequired(String),

    #[error("pair index {index} out of range for {k} pairs")]
    IndexOutOfRange { index: usize, k: usize },

    #[error("right-hand matrix is numerically singular; use ridge > 0")]
    SingularConstraint,

    #[error("stratification error: {0}")]
    Stratification(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("checkpoint version {found} is not supported (expected {expected})")]
    CheckpointVersion { found: u32, expected: u32 },

    #[error("checkpoint is corrupt: {0}")]
    CorruptCheckpoint(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// True for failures of the numerical stages (as opposed to bad input files).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotConverged { .. }
                | Error::DegenerateBasis { .. }
                | Error::RefreshRequired(_)
                | Error::SingularConstraint
                | Error::ZeroDegree { .. }
        )
    }
}
