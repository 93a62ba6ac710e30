use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("ROI {0} has a constant time series")]
    ConstantRow(usize),
    #[error("graph has no edges")]
    EmptyGraph,
    #[error("dense correlation weights sum to zero")]
    DenseWeightZero,
    #[error("first spanning tree covers {covered} of {nodes} nodes; input graph is disconnected")]
    DisconnectedInput { covered: usize, nodes: usize },
    #[error("tensor shape {0:?} needs at least two dimensions")]
    BadShape(Vec<usize>),
    #[error("row {0} is linearly dependent on the previous rows")]
    RankDeficient(usize),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("backward needs a scalar loss, got {0} elements")]
    NotScalar(usize),
    #[error("empty set for {0}")]
    EmptySet(String),
    #[error("empty group")]
    EmptyGroup,
    #[error("both classes are required to compute AUC")]
    SingleClassSplit,
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Diverged { epoch: usize },
    #[error("checkpoint checksum mismatch (expected {expected}, found {found})")]
    ChecksumMismatch { expected: String, found: String },
    #[error("malformed file {path}: {reason}")]
    Format { path: String, reason: String },
    #[error("missing artifact: {0}")]
    MissingArtifact(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn format(path: impl std::fmt::Display, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.to_string(),
            reason: reason.into(),
        }
    }
}
