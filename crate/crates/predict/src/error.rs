use perdyn_core::{CoreError, ErrorClass};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PredictError {
    #[error("validation error: {0}")]
    Validation(String),
    #[error(transparent)]
    Core(#[from] CoreError),
}

impl PredictError {
    pub fn class(&self) -> ErrorClass {
        match self {
            PredictError::Validation(_) => ErrorClass::Validation,
            PredictError::Core(e) => e.class(),
        }
    }
}

pub type Result<T, E = PredictError> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> PredictError {
    PredictError::Validation(msg.into())
}
