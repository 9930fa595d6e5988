use thiserror::Error;

/// Failure modes shared by every module of the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid couplings: {0}")]
    InvalidCouplings(String),

    #[error("lattice too small: L = {length} must exceed the hopping range R = {range}")]
    SizeTooSmall { length: usize, range: usize },

    #[error("wrong model family: expected {expected}, found {found}")]
    WrongFamily {
        expected: &'static str,
        found: &'static str,
    },

    #[error("matrix is not Hermitian (max |H - H^dagger| = {0:e})")]
    NotHermitian(f64),

    #[error("linear algebra kernel failed: {0}")]
    Decomposition(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("critical point, {0}")]
    Critical(String),

    #[error("input is not critical: minimal band energy {0:e}")]
    NotCritical(f64),

    #[error("trivial phase: {0}")]
    TrivialPhase(String),

    #[error("state tracking ambiguity: {0}")]
    Tracking(String),

    #[error("state is not normalized (norm deviation {0:e})")]
    NotNormalized(f64),

    #[error("accuracy budget exceeded: {0}")]
    Accuracy(String),

    #[error("fit rejected: {0}")]
    Fit(String),
}

pub type Result<T> = std::result::Result<T, Error>;
