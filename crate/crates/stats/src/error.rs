use perdyn_core::{CoreError, ErrorClass};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("validation error: {0}")]
    Validation(String),
    /// The statistic is undefined for this input (for example zero variance
    /// everywhere).
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error(transparent)]
    Core(#[from] CoreError),
}

impl StatsError {
    pub fn class(&self) -> ErrorClass {
        match self {
            StatsError::Validation(_) => ErrorClass::Validation,
            StatsError::Degenerate(_) => ErrorClass::Numeric,
            StatsError::Core(e) => e.class(),
        }
    }
}

pub type Result<T, E = StatsError> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> StatsError {
    StatsError::Validation(msg.into())
}
