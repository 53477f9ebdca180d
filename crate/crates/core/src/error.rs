use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("path count must be at least one")]
    EmptyPathSet,

    #[error("reflection coefficient {index} has modulus {modulus}, expected 1")]
    NonUnitModulus { index: usize, modulus: f64 },

    #[error("invalid partition: {0}")]
    Partition(String),

    #[error("invalid pairing matrix: {0}")]
    Pairing(String),

    #[error("allocation violates constraint: {0}")]
    Constraint(String),

    #[error("covariance is not positive semidefinite (min eigenvalue {min_eigenvalue})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("oracle guard violated: {0}")]
    OracleGuard(String),

    #[error("failed to parse record: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
