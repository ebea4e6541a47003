use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (max |m - m^dagger| = {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("matrix is not unitary (max |U^dagger U - I| = {deviation:e})")]
    NotUnitary { deviation: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid state: {0}")]
    StateInvalid(String),

    #[error("outcome {outcome} has probability {probability:e}; its conditional state is undefined")]
    ZeroProbabilityBranch { outcome: i8, probability: f64 },

    #[error("Bayes evidence {evidence:e} is below threshold; outcome impossible under the prior")]
    DegenerateEvidence { evidence: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
