use thiserror::Error;

/// Errors produced by the library.
///
/// Variants are grouped by how a caller is expected to react: invalid input
/// (fix the arguments), numerical failure (the instance is degenerate or a
/// search cap was hit), and internal certificate failures (a bug).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("point id {id} out of range for {len} points")]
    IdOutOfRange { id: usize, len: usize },

    #[error("point {index} lies outside the unit cube")]
    OutsideUnitCube { index: usize },

    #[error("point {index} violates the norm bound: K(x,x) = {value} > B^2 = {bound_sq}")]
    NormBoundViolated {
        index: usize,
        value: f64,
        bound_sq: f64,
    },

    #[error("gram matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },

    #[error("gram matrix is not positive semidefinite: min eigenvalue {min_eigenvalue}")]
    NotPsd { min_eigenvalue: f64 },

    #[error("degenerate gram: pivot {pivot_sq} below threshold {threshold}; retry with a larger lambda")]
    DegenerateGram { pivot_sq: f64, threshold: f64 },

    #[error("exhaustive search budget of {budget} exceeded")]
    BudgetExceeded { budget: u64 },

    #[error("critical information gain not found for k <= {k_max}")]
    CriticalNotFound { k_max: usize },

    #[error("grid too short: {0}")]
    GridTooShort(String),

    #[error("witness failed verification: {0}")]
    WitnessInvalid(String),
}

impl Error {
    /// True for failures caused by the numerics of an instance rather than
    /// by malformed arguments.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::DegenerateGram { .. }
                | Error::BudgetExceeded { .. }
                | Error::CriticalNotFound { .. }
                | Error::NotPsd { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
