use thiserror::Error;

use crate::model::Diagnostics;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("LP solver failure: {0}")]
    Solver(String),

    #[error("polyhedron is unbounded in the requested directions")]
    Unbounded,

    #[error("unsupported plant: {0}")]
    UnsupportedPlant(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("model validation failed: {reason}")]
    Validation {
        reason: String,
        diagnostics: Box<Diagnostics>,
    },

    #[error("{what} exceeded its cap of {cap}: {hint}")]
    CapExceeded {
        what: &'static str,
        cap: usize,
        hint: String,
    },

    #[error("problem schema violation: {}", .0.join("; "))]
    Schema(Vec<String>),

    #[error("Riccati iteration did not converge after {0} iterations")]
    RiccatiDivergence(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
