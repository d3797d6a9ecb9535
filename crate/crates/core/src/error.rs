use thiserror::Error;

/// Errors raised by the homogenization toolkit.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numeric domain error: {0}")]
    NumericDomain(String),

    /// A modelling assumption was violated by the supplied data. The first
    /// field names the assumption (e.g. "monotonicity").
    #[error("assumption violated ({assumption}): {detail}")]
    Assumption { assumption: String, detail: String },

    #[error("linear solver failed after {iterations} iterations (relative residual {residual:.3e})")]
    LinearSolver {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("operator is not symmetric: {0}")]
    OperatorContract(String),

    #[error("fixed-point iteration failed to contract (estimated factor {factor:.3}) after {sweeps} sweeps")]
    Contraction { factor: f64, sweeps: usize },

    #[error("cell problem did not converge (residual {residual:.3e})")]
    CellSolver { residual: f64, history: Vec<f64> },

    #[error("solution diverged: {0}")]
    Divergence(String),

    #[error("Dirac trajectory does not settle along the schedule: {trajectory:?}")]
    Subsequence { trajectory: Vec<Vec<f64>> },

    #[error("domain error: {0}")]
    Domain(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
