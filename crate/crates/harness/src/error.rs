use std::fmt::Display;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure in {context}: {source}")]
    Numerical {
        context: String,
        source: freelab_core::Error,
    },
    #[error("I/O error on {path}: {message}")]
    Io { path: String, message: String },
}

impl HarnessError {
    /// 1 for configuration errors, 2 for numerical failures, 3 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 1,
            HarnessError::Numerical { .. } => 2,
            HarnessError::Io { .. } => 3,
        }
    }

    pub fn io(path: &Path, err: impl Display) -> Self {
        HarnessError::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }

    /// Numerical core errors keep their kind; everything else is bad input.
    pub fn core(context: &str, err: freelab_core::Error) -> Self {
        if err.is_numerical() {
            HarnessError::Numerical {
                context: context.to_string(),
                source: err,
            }
        } else {
            HarnessError::Config(format!("{context}: {err}"))
        }
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

/// Attaches a context label to core results.
pub trait Context<T> {
    fn ctx(self, context: &str) -> Result<T>;
}

impl<T> Context<T> for freelab_core::Result<T> {
    fn ctx(self, context: &str) -> Result<T> {
        self.map_err(|e| HarnessError::core(context, e))
    }
}
