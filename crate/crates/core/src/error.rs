use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Shape or length mismatch between two objects that must agree.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// An argument violates a precondition.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A rejection-sampling loop exhausted its retry budget.
    #[error("generation failed: {0}")]
    Generation(String),

    /// Training aborted (non-finite loss or similar).
    #[error("training aborted: {0}")]
    Training(String),

    /// A matrix was singular to working tolerance; reports the minimum pivot.
    #[error("singular matrix: min pivot {min_pivot:e}")]
    Singular { min_pivot: f64 },

    /// Text that failed to parse as a formula, dataset, or model.
    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
