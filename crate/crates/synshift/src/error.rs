use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shift {shift} out of range 0..={max_shift} (window {window}, template length {template_len})")]
    ShiftOutOfRange {
        shift: usize,
        max_shift: usize,
        window: usize,
        template_len: usize,
    },

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("{step} failed for {unit} {index}: {source}")]
    Step {
        step: &'static str,
        unit: &'static str,
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("numerical divergence: {0}")]
    Divergence(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn dim(context: &'static str, expected: usize, actual: usize) -> Self {
        Error::DimensionMismatch {
            context,
            expected,
            actual,
        }
    }
}
