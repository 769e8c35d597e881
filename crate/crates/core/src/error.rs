use thiserror::Error;

/// Errors shared across the library.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("configuration has {n} points, transform is capped at {cap}")]
    CardinalityLimit { n: usize, cap: usize },

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("quadrature failed to reach tolerance {tol:e} (best error {err:e})")]
    QuadratureFailure { tol: f64, err: f64 },

    #[error("structural condition failure: {0}")]
    StructuralFailure(String),

    #[error("solver failure: {0}")]
    SolverFailure(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;
