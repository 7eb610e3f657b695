use thiserror::Error;

/// Errors raised by the library outside of the sampling hot path.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("empty chain: no samples left after burn-in")]
    EmptyChain,

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Reasons a discretized forward solve can fail. Failures turn into an
/// infinite potential so the offending proposal is rejected.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverFailure {
    #[error("non-finite value in forward output")]
    NonFinite,

    #[error("iterate diverged (|z| = {magnitude:e} at t = {at})")]
    Diverged { magnitude: f64, at: f64 },

    #[error("non-positive Young's modulus {value} at x = {at}")]
    NonPositiveModulus { value: f64, at: f64 },

    #[error("point ({0}, {1}) is not covered by the mesh")]
    OutsideMesh(f64, f64),

    #[error("discretization does not match this forward model: {0}")]
    Incompatible(&'static str),

    #[error("linear solve failed: {0}")]
    Singular(String),
}
