use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown item symbol {0:?}")]
    UnknownSymbol(String),
    #[error("row {row}: {cause}")]
    MalformedRow { row: usize, cause: String },
    #[error("journey has no outcome event")]
    MissingOutcome,
    #[error("no journey survived cleansing")]
    EmptyDataset,
    #[error("invalid weight {0:?}: weights must be non-negative rationals")]
    InvalidWeight(String),
    #[error("all effective stage weights are zero")]
    DegenerateConfig,
    #[error("invalid k = {k} for {n} points")]
    InvalidK { k: usize, n: usize },
    #[error("invalid cluster assignment: {0}")]
    InvalidAssignment(String),
    #[error("eigensolver did not converge within {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
    #[error("embedding needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("k-NN model has no training journeys")]
    EmptyModel,
    #[error("dataset contains a single outcome class")]
    SingleClassDataset,
    #[error("no counterfactual candidates")]
    NoCandidates,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
