//! Command-line driver for `hlsl`: configuration, the end-to-end pipeline
//! (generate, learn, infer, evaluate) and the runtime benchmark.

pub mod app;
pub mod config;
pub mod pipeline;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use app::{run, Cli};
pub use config::{Method, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Input { path: PathBuf, source: hlsl::Error },
    #[error(transparent)]
    Lib(#[from] hlsl::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },
    #[error("no path configured for `{0}`; set `data` or `{0}`")]
    MissingPath(&'static str),
    #[error("no prediction for labelled atom {0}")]
    MissingPrediction(String),
    #[error("cannot start worker pool: {0}")]
    ThreadPool(String),
}

impl CliError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn input(path: &Path, source: impl Into<hlsl::Error>) -> Self {
        CliError::Input {
            path: path.to_path_buf(),
            source: source.into(),
        }
    }

    /// Stable machine-readable name of the failure.
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Input { source, .. } | CliError::Lib(source) => source.code(),
            CliError::Io { .. } => "Io",
            CliError::Config { .. } => "InvalidConfig",
            CliError::MissingPath(_) => "MissingPath",
            CliError::MissingPrediction(_) => "MissingPrediction",
            CliError::ThreadPool(_) => "ThreadPool",
        }
    }
}

macro_rules! lib_error {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Lib(e.into())
            }
        }
    )*};
}

lib_error!(
    hlsl::DataError,
    hlsl::LearnError,
    hlsl::GenerationError,
    hlsl::EvalError,
    hlsl::ModelIoError
);
