use thiserror::Error;

/// Errors raised while building systems, transition matrices and ensembles.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not Hermitian: max |A - A^H| = {defect:.3e}")]
    NotHermitian { defect: f64 },

    #[error("eigensolver failed to converge ({0})")]
    ConvergenceFailure(&'static str),

    #[error("invalid spin {0}: 2s must be a positive integer")]
    InvalidSpin(f64),

    #[error("exponent overflow: {0}")]
    Overflow(String),

    #[error("invalid oscillator truncation n_max = {0} (must be >= 1)")]
    InvalidTruncation(usize),

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("{what} is not unitary: max |U^H U - I| = {defect:.3e}")]
    NotUnitary { what: &'static str, defect: f64 },

    #[error("transition matrix violates double stochasticity by {deviation:.3e}")]
    StochasticityViolation { deviation: f64 },

    #[error("transition matrix is not symmetric: max |L - L^T| = {defect:.3e}")]
    Asymmetric { defect: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("exact enumeration too large: N = {dim}, M = {measurements} (limit N <= 6, M <= 6)")]
    TooLarge { dim: usize, measurements: usize },

    #[error("sampling distribution sums to {total} instead of 1")]
    ProbabilityUnderflow { total: f64 },

    #[error("ensemble is empty")]
    EmptyEnsemble,

    #[error("energy eigenvector {index} is not supported on a single block (weight {weight:.3e} outside)")]
    BlockMismatch { index: usize, weight: f64 },

    #[error("matrix logarithm undefined: eigenvalue {0} on the negative real axis")]
    BranchFailure(String),

    #[error("scaling collapse needs at least 3 tau values, got {0}")]
    InsufficientTaus(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
