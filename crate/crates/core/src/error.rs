use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse failure category, used by the CLI and the C API to pick exit
/// codes and status values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Numeric,
    Io,
}

impl ErrorClass {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorClass::Config => "config",
            ErrorClass::Numeric => "numeric",
            ErrorClass::Io => "io",
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("primitive {primitive} has no reachable samples: {reason}")]
    UnreachablePrimitive { primitive: usize, reason: String },

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("non-finite value at step {step}, layer {layer} ({stage})")]
    NonFinite {
        step: usize,
        layer: usize,
        stage: &'static str,
    },

    #[error("training diverged at epoch {epoch} in phase `{phase}`")]
    Diverged {
        phase: String,
        epoch: usize,
        /// Parameters and latent codes from the last epoch whose loss was finite.
        last_good: Box<crate::training::TrainState>,
    },

    #[error("bad checkpoint {path}: {reason}")]
    Checkpoint { path: PathBuf, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error in {context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("csv error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidArgument(_)
            | Error::DimensionMismatch { .. }
            | Error::UnreachablePrimitive { .. }
            | Error::Json { .. } => ErrorClass::Config,
            Error::Degenerate(_) | Error::NonFinite { .. } | Error::Diverged { .. } => {
                ErrorClass::Numeric
            }
            Error::Checkpoint { .. } | Error::Io { .. } | Error::Csv { .. } => ErrorClass::Io,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }
}
