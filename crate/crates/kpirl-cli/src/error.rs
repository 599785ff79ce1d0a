//! Error classes behind the process exit codes: 2 for configuration and
//! usage problems, 3 for numeric divergence, 4 for file problems.

use std::fmt;

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_DIVERGENCE: u8 = 3;
pub const EXIT_IO: u8 = 4;

#[derive(Debug)]
pub enum AppError {
    /// Bad flags, unparsable or inconsistent configuration, or inputs
    /// that contradict it.
    Config(String),
    /// Training produced non-finite numbers.
    Divergence(String),
    /// Missing, unreadable, unwritable, or malformed files, including a
    /// refused overwrite.
    Io(String),
}

impl AppError {
    pub fn exit_code(&self) -> u8 {
        match self {
            AppError::Config(_) => EXIT_CONFIG,
            AppError::Divergence(_) => EXIT_DIVERGENCE,
            AppError::Io(_) => EXIT_IO,
        }
    }
}

impl fmt::Display for AppError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AppError::Config(m) => write!(f, "configuration: {m}"),
            AppError::Divergence(m) => write!(f, "divergence: {m}"),
            AppError::Io(m) => write!(f, "file: {m}"),
        }
    }
}

impl std::error::Error for AppError {}

impl From<kpirl_core::Error> for AppError {
    fn from(e: kpirl_core::Error) -> Self {
        match &e {
            kpirl_core::Error::NonFinite { .. } => AppError::Divergence(e.to_string()),
            kpirl_core::Error::Io(_) | kpirl_core::Error::Format(_) => AppError::Io(e.to_string()),
            _ => AppError::Config(e.to_string()),
        }
    }
}

impl From<std::io::Error> for AppError {
    fn from(e: std::io::Error) -> Self {
        AppError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for AppError {
    fn from(e: serde_json::Error) -> Self {
        AppError::Io(e.to_string())
    }
}

impl From<csv::Error> for AppError {
    fn from(e: csv::Error) -> Self {
        AppError::Io(e.to_string())
    }
}

pub type AppResult<T> = Result<T, AppError>;

/// Attaches the file path to a bare I/O or format error.
pub fn at_path(path: &std::path::Path, e: impl Into<AppError>) -> AppError {
    match e.into() {
        AppError::Io(m) => AppError::Io(format!("{}: {m}", path.display())),
        other => other,
    }
}
