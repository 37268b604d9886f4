//! Crate-wide error type.

use thiserror::Error;

/// Everything that can go wrong across the solver stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not symmetric (max asymmetry {0:.3e})")]
    NotSymmetric(f64),
    #[error("matrix is not positive definite (jitter escalation exhausted)")]
    NotPositiveDefinite,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("oracle returned a non-finite value in {0}")]
    OracleFailure(String),
    #[error("could not sample an interior point for derivative checks")]
    NoInteriorPoint,
    #[error("barrier evaluated at or beyond the constraint boundary (max h = {0:.3e})")]
    BoundaryViolation(f64),
    #[error("missing constant for the linear setting: {0}")]
    MissingConstant(String),
    #[error("Slater's condition appears violated: no nonempty shrunk set found down to d = 1e-12")]
    SlaterViolation,
    #[error("projection target set is empty")]
    EmptySet,
    #[error("projection stalled before reaching tolerance {0:.3e}")]
    Stalled(f64),
    #[error("lower solver hit the iteration clamp without certifying the requested accuracy")]
    BudgetExhausted,
    #[error("brute-force oracle found no feasible point")]
    Infeasible,
    #[error("lower-level optimum is not unique; tau is undefined")]
    NonUniqueOptimum,
    #[error("KKT stationarity residual too large: {0:.3e}")]
    ResidualTooLarge(f64),
    #[error("point leaves the upper-level feasible set during finite differencing")]
    OutsideUpperSet,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
