use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Invalid block-model or scenario parameters.
    #[error("invalid parameter `{key}`: {reason}")]
    Parameter { key: &'static str, reason: String },

    #[error("ingestion failed: {0}")]
    Ingestion(String),

    #[error("ingestion failed: {} node id(s) have no block label: {}", .0.len(), .0.join(", "))]
    Unlabeled(Vec<String>),

    #[error("estimation failed: {0}")]
    Estimation(String),

    /// q(u, u) is not part of the model.
    #[error("influence weight undefined for u == w (node {0})")]
    SelfInfluence(usize),

    #[error("node {node} out of range (graph has {n} nodes)")]
    NodeOutOfRange { node: usize, n: usize },

    #[error("not a probability vector: {0}")]
    NotProbability(String),

    #[error("voter {0} is seeded and its preferences are fixed")]
    SeededVoter(usize),

    #[error("aggregate drift {drift:e} exceeds tolerance {tolerance:e}")]
    StaleAggregates { drift: f64, tolerance: f64 },

    #[error("seed placement failed: {0}")]
    Placement(String),

    #[error("degenerate model: {0}")]
    Degenerate(String),

    #[error("malformed graph data: {0}")]
    Format(String),
}

impl Error {
    pub(crate) fn param(key: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            key,
            reason: reason.into(),
        }
    }
}
