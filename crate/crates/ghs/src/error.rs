//! Crate-wide error type.
//!
//! Every fallible operation in the library returns [`GhsError`]. Variants are
//! grouped by what the caller can do about them: bad arguments and dimension
//! mismatches are caller bugs, degenerate-data and singular-solve variants are
//! properties of the input data, and `Parse`/`Io` carry file context for the
//! CLI to surface verbatim.

use std::path::PathBuf;

use thiserror::Error;

/// Convenient alias used throughout the crate.
pub type Result<T> = std::result::Result<T, GhsError>;

#[derive(Debug, Error)]
pub enum GhsError {
    /// An operation that needs at least one element received none.
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    /// Two containers that must agree in size do not.
    #[error("{context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    /// A configuration or argument value is outside its documented range.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A matrix that must be symmetric is not, beyond the 1e-10 tolerance.
    #[error("matrix is not symmetric (max |a_ij - a_ji| = {max_asymmetry:.3e})")]
    NotSymmetric { max_asymmetry: f64 },

    /// Both leading coefficients of a quadratic are zero; there is nothing
    /// to solve.
    #[error("degenerate quadratic: a = b = 0")]
    DegenerateQuadratic,

    /// The input data cannot support the requested fit (e.g. zero variance).
    #[error("degenerate data: {0}")]
    DegenerateData(&'static str),

    /// A factorization or linear solve failed.
    #[error("linear solve failed: {0}")]
    Singular(&'static str),

    /// A file exists and was readable but its contents violate the format.
    #[error("{}: {detail}", path.display())]
    Parse { path: PathBuf, detail: String },

    /// An underlying I/O operation failed; `path` says on what.
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl GhsError {
    /// Builds a `Parse` error with file context.
    pub(crate) fn parse(path: impl Into<PathBuf>, detail: impl Into<String>) -> Self {
        GhsError::Parse {
            path: path.into(),
            detail: detail.into(),
        }
    }

    /// Adapter for `map_err` that attaches a path to an I/O error.
    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| GhsError::Io { path, source }
    }
}
