//! Crate-wide error type with exit-code classification for the CLI.

use thiserror::Error;

/// Everything that can go wrong across ingestion, training, and persistence.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed input data, reported with a 1-based line number.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Invalid configuration, flag combination, or config-file contents.
    #[error("config error: {0}")]
    Config(String),

    /// Structurally invalid data passed between modules.
    #[error("data error: {0}")]
    Data(String),

    /// Model file cannot be read back (corrupt payload, unknown version).
    #[error("model file error: {0}")]
    Model(String),

    /// The per-sentence loss became non-finite during an SGD step.
    #[error("non-finite training loss (divergence); lower the learning rate")]
    NonFiniteLoss,

    /// Divergence located within a training run.
    #[error("training diverged at epoch {epoch}, sentence {sentence}; lower the learning rate")]
    Divergence { epoch: usize, sentence: usize },
}

impl Error {
    /// Process exit code the CLI maps this error to.
    ///
    /// 1 = usage/config, 2 = data, 3 = divergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            Error::Io(_) | Error::Parse { .. } | Error::Data(_) | Error::Model(_) => 2,
            Error::NonFiniteLoss | Error::Divergence { .. } => 3,
        }
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
