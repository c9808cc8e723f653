use thiserror::Error;

use crate::CMatrix;

#[derive(Debug, Error)]
pub enum IsacError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        actual: String,
    },

    #[error("ill-conditioned system (condition number {condition:.3e}); consider regularization")]
    IllConditioned { condition: f64 },

    /// Iterative solver hit its cap. `best` holds the best iterate when one exists.
    #[error("{solver} did not converge after {iterations} iterations (best objective {objective:.6e})")]
    NotConverged {
        solver: &'static str,
        iterations: usize,
        objective: f64,
        best: Option<Box<CMatrix>>,
    },

    #[error("invalid observation file: {0}")]
    Format(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, IsacError>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(IsacError::Domain(msg.into()))
}

pub(crate) fn shape(m: &CMatrix) -> String {
    format!("{}x{}", m.nrows(), m.ncols())
}

pub(crate) fn mismatch<T>(
    context: &'static str,
    expected: impl Into<String>,
    actual: impl Into<String>,
) -> Result<T> {
    Err(IsacError::DimensionMismatch {
        context,
        expected: expected.into(),
        actual: actual.into(),
    })
}
