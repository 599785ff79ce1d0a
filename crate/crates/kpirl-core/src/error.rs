use thiserror::Error;

/// Crate-wide error type. Training loops surface `NonFinite` when a loss or
/// gradient diverges; callers decide whether that is fatal.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    ShapeMismatch {
        context: &'static str,
        expected: String,
        got: String,
    },

    #[error("value does not live on this tape")]
    UnknownNode,

    #[error("non-finite value in {context}{}", detail_suffix(.detail))]
    NonFinite {
        context: &'static str,
        detail: Option<String>,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("bad file format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn detail_suffix(detail: &Option<String>) -> String {
    match detail {
        Some(d) => format!(" ({d})"),
        None => String::new(),
    }
}

impl Error {
    pub fn shape(context: &'static str, expected: impl Into<String>, got: impl Into<String>) -> Self {
        Error::ShapeMismatch {
            context,
            expected: expected.into(),
            got: got.into(),
        }
    }

    pub fn non_finite(context: &'static str) -> Self {
        Error::NonFinite {
            context,
            detail: None,
        }
    }

    pub fn non_finite_at(context: &'static str, detail: impl Into<String>) -> Self {
        Error::NonFinite {
            context,
            detail: Some(detail.into()),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
