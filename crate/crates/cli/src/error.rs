use std::fmt;

use perdyn_core::{CoreError, ErrorClass};
use perdyn_predict::PredictError;
use perdyn_stats::StatsError;
use perdyn_xmodal::XmodalError;
use serde::Serialize;

/// Error surfaced to the user with its class; the class picks the exit code.
#[derive(Debug)]
pub struct CliError {
    pub class: ErrorClass,
    pub message: String,
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        Self {
            class: ErrorClass::Validation,
            message: message.into(),
        }
    }

    pub fn numeric(message: impl Into<String>) -> Self {
        Self {
            class: ErrorClass::Numeric,
            message: message.into(),
        }
    }

    /// Io problems are input problems from the caller's side and share the
    /// validation code.
    pub fn exit_code(&self) -> i32 {
        match self.class {
            ErrorClass::Validation | ErrorClass::Io => 2,
            ErrorClass::Numeric => 3,
        }
    }

    /// Prefixes the message, keeping the class.
    pub fn context(self, what: impl fmt::Display) -> Self {
        Self {
            class: self.class,
            message: format!("{what}: {}", self.message),
        }
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Body<'a> {
            class: &'a str,
            exit_code: i32,
            message: &'a str,
        }
        #[derive(Serialize)]
        struct Envelope<'a> {
            error: Body<'a>,
        }
        serde_json::to_string(&Envelope {
            error: Body {
                class: self.class.as_str(),
                exit_code: self.exit_code(),
                message: &self.message,
            },
        })
        .expect("plain strings serialize")
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} error: {}", self.class.as_str(), self.message)
    }
}

impl std::error::Error for CliError {}

macro_rules! from_classified {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                Self { class: e.class(), message: e.to_string() }
            }
        }
    )*};
}

from_classified!(CoreError, StatsError, XmodalError, PredictError);

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self {
            class: ErrorClass::Io,
            message: e.to_string(),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Self::validation(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::validation(e.to_string())
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
