use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum ValError {
    /// A configuration value is missing, out of range, or inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    /// Input data could not be parsed. `row` is 1-based and counts the header.
    #[error("malformed input at row {row}: {message}")]
    MalformedInput { row: usize, message: String },

    /// Dimensions of two arguments do not agree, or an index is out of range.
    #[error("shape error: {0}")]
    Shape(String),

    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The label oracle was asked for more distinct labels than its budget allows.
    #[error("label budget of {budget} exhausted")]
    BudgetExceeded { budget: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl ValError {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        ValError::Config(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        ValError::Shape(msg.into())
    }

    /// True for errors caused by user-supplied configuration rather than
    /// by data or runtime conditions.
    pub fn is_config(&self) -> bool {
        matches!(self, ValError::Config(_))
    }
}

pub type Result<T, E = ValError> = std::result::Result<T, E>;
