use perdyn_core::{CoreError, ErrorClass};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum XmodalError {
    #[error("validation error: {0}")]
    Validation(String),
    /// Non-finite activation; `layer` names the stage that produced it.
    #[error("non-finite activation in {layer}")]
    Numeric { layer: String },
    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Divergence { epoch: usize, loss: f64 },
    #[error("parameter file: {0}")]
    Format(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Core(#[from] CoreError),
}

impl XmodalError {
    pub fn class(&self) -> ErrorClass {
        match self {
            XmodalError::Validation(_) | XmodalError::Format(_) => ErrorClass::Validation,
            XmodalError::Numeric { .. } | XmodalError::Divergence { .. } => ErrorClass::Numeric,
            XmodalError::Io(_) => ErrorClass::Io,
            XmodalError::Core(e) => e.class(),
        }
    }
}

pub type Result<T, E = XmodalError> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> XmodalError {
    XmodalError::Validation(msg.into())
}
