//! Error type shared by all modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value in {what}")]
    NonFinite { what: &'static str },

    #[error("{what} must not be empty")]
    Empty { what: &'static str },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("insufficient data: need at least {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("scale parameter must be positive and finite, got {value}")]
    InvalidScale { value: f64 },

    #[error("matrix is not positive definite: pivot {pivot:.6e} at index {index}")]
    SingularMatrix { pivot: f64, index: usize },

    #[error("duplicate points at indices {first} and {second}")]
    DuplicatePoints { first: usize, second: usize },

    #[error("degenerate augmentation: schur scalar {schur:.6e} <= 0 (query duplicates a training point)")]
    DegenerateAugmentation { schur: f64 },

    #[error("space is not scattered: (n-1)*max off-diagonal similarity = {ratio:.6e} >= 1")]
    NotScattered { ratio: f64 },

    #[error("invalid block partition: {reason}")]
    InvalidPartition { reason: String },

    #[error("magnitude function failed at every grid point")]
    AllGaps,

    #[error("AUC undefined: labels contain a single class")]
    AucUndefined,

    #[error("training labels contain a single class")]
    SingleClass,

    #[error("linear system is singular at ridge 0; retry with a positive ridge term")]
    RidgeRequired,

    #[error("graph is disconnected: components {summary}")]
    DisconnectedGraph { summary: String },

    #[error("invalid graph: {reason}")]
    InvalidGraph { reason: String },

    #[error("every grid value failed to fit")]
    NoUsableScale,

    #[error("labeling budget {budget} below the initial labeled set size {needed}")]
    BudgetTooSmall { budget: usize, needed: usize },

    #[error("no unlabeled points available to query")]
    NoUnlabeled,

    #[error("invalid input: {0}")]
    Input(String),
}

pub type Result<T> = std::result::Result<T, Error>;
