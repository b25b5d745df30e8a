use thiserror::Error;

/// Coarse classification used by the command line to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Numeric,
    Io,
}

impl ErrorClass {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorClass::Validation => "validation",
            ErrorClass::Numeric => "numeric",
            ErrorClass::Io => "io",
        }
    }
}

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("validation error: {0}")]
    Validation(String),
    #[error("no data: {0}")]
    NoData(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl CoreError {
    pub fn class(&self) -> ErrorClass {
        match self {
            CoreError::Validation(_) | CoreError::NoData(_) | CoreError::Csv(_) => {
                ErrorClass::Validation
            }
            CoreError::Io(_) => ErrorClass::Io,
        }
    }
}

pub type Result<T, E = CoreError> = std::result::Result<T, E>;

pub(crate) fn validation(msg: impl Into<String>) -> CoreError {
    CoreError::Validation(msg.into())
}
