use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the relay / detector / attack pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("no feasible FDIA multiplier found after {draws} draws")]
    Infeasible { draws: usize },

    #[error("generation failed for scenario {scenario}: {reason}")]
    Generation { scenario: String, reason: String },

    #[error("cannot stratify: {0}")]
    Stratification(String),

    #[error("scaler error: {0}")]
    Scaler(String),

    #[error("numeric error in {layer}: {detail}")]
    Numeric { layer: String, detail: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("format error in {path}: {detail}")]
    Format { path: PathBuf, detail: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, detail: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            detail: detail.into(),
        }
    }

    /// Short category name, used by the CLI to pick an exit code.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Parameter(_) | Error::Config(_) => "config",
            Error::Shape(_) | Error::InsufficientData(_) | Error::Empty(_) => "input",
            Error::Infeasible { .. } | Error::Generation { .. } => "generation",
            Error::Stratification(_) | Error::Scaler(_) => "data",
            Error::Numeric { .. } => "numeric",
            Error::Format { .. } | Error::Io { .. } => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
