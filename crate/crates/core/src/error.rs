use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },

    #[error("numerically singular basis: {0}")]
    Singular(String),

    #[error("candidate budget of {budget} exceeded")]
    BudgetExceeded { budget: u64 },

    #[error("non-generic input: {0}")]
    NonGeneric(String),

    #[error("inconsistent successor: {0}")]
    InconsistentSuccessor(String),

    #[error("lattice is not on the transversal: {0}")]
    NotOnSurface(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("resonance: {0}")]
    Resonance(String),

    #[error("proposal box too small: {0}")]
    BoxTooSmall(String),

    #[error("search bound exhausted: {0}")]
    SearchExhausted(String),

    #[error("certification failed: {0}")]
    Certification(String),

    #[error("empty sample")]
    EmptySample,
}

pub type Result<T> = std::result::Result<T, Error>;
