use thiserror::Error;

/// Errors raised by the numerics, solvers, simulator and evaluation code.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix entries must be finite ({0})")]
    NonFiniteEntry(String),

    #[error("Cholesky factorization failed: pivot {pivot} at index {index} is not positive")]
    FactorizationFailed { index: usize, pivot: f64 },

    #[error("matrix is not symmetric positive-definite: {0}")]
    NotPositiveDefinite(String),

    #[error("AR(1) correlation must satisfy |rho| < 1, got {0}")]
    InvalidRho(f64),

    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),

    #[error("step size fell below {floor:e} without producing a finite objective")]
    StepSizeUnderflow { floor: f64 },

    #[error("objective left the finite reals at outer iteration {iteration}")]
    NonFiniteObjective { iteration: usize },

    #[error("simulation config is infeasible: {0}")]
    ConfigInfeasible(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("degenerate split: {0}")]
    DegenerateSplit(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
