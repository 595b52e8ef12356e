use crate::prelude::*;

/// Errors raised by model construction, assembly and factorization.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("derivative order {order} exceeds the supported maximum {max}")]
    UnsupportedOrder { order: u32, max: u32 },

    #[error("the function does not supply the derivative {0:?}")]
    MissingDerivative(Vec<u32>),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("unknown segment `{0}`")]
    UnknownSegment(String),

    #[error("segment `{0}` has no outward normal")]
    NoNormal(String),

    #[error("unknown boundary condition kind `{0}`")]
    UnknownBoundaryKind(String),

    #[error("syntax error at column {column}: {message}")]
    Syntax { column: usize, message: String },

    #[error("unbound variable `{0}` in coefficient expression")]
    UnboundVariable(String),

    #[error("quadrature weight {0} is not strictly positive")]
    InvalidWeight(f64),

    #[error("matrix is not symmetric: max |a_ij - a_ji| = {0:e}")]
    Asymmetric(f64),

    #[error("singular system: Cholesky failed with jitter up to {max_jitter:e}")]
    Singular { max_jitter: f64 },

    #[error("discretized kernel is not positive semi-definite: minimum eigenvalue {min_eigenvalue:e}")]
    NotPositiveSemiDefinite { min_eigenvalue: f64 },

    #[error("selection stage `{0}` diverged at every grid value")]
    AllDiverged(String),
}

pub type Result<T> = core::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures of the numerical linear algebra, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Singular { .. } | Error::NotPositiveSemiDefinite { .. } | Error::AllDiverged(_)
        )
    }
}
