use thiserror::Error;

use crate::geometry::Side;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("unsupported Sobolev order {0}; discrete norms are available for k <= 3")]
    UnsupportedOrder(usize),

    #[error("embedding hypothesis violated: k = {0} must exceed n/2 = 1")]
    EmbeddingHypothesis(usize),

    #[error("admissibility violated at node (x' #{i}, x_n #{j}): {reason}")]
    Admissibility { i: usize, j: usize, reason: String },

    #[error("weight evaluated outside (-T, T): t = {t}, T = {horizon}")]
    WeightDomain { t: f64, horizon: f64 },

    #[error("rejected weight candidate: {0}")]
    Candidate(String),

    #[error("support of the test field touches |t| = T")]
    SupportTouchesHorizon,

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("side {0:?} is not part of the observed subboundary")]
    SideNotObserved(Side),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
