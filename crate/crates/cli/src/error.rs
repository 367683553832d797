//! Command errors and their process exit codes.

use std::path::PathBuf;

use thiserror::Error;

use scaffgen::training::TrainError;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, config keys or argument values (exit 1).
    #[error("{0}")]
    Usage(String),
    /// Unreadable or malformed input data (exit 2).
    #[error("{0}")]
    Data(String),
    /// Some input lines were rejected; outputs cover the rest (exit 2).
    #[error("{failed} of {total} input lines were rejected")]
    Partial { failed: usize, total: usize },
    /// Non-finite loss or gradient (exit 3).
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) | CliError::Partial { .. } | CliError::Io { .. } => 2,
            CliError::Numerical(_) => 3,
        }
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Config(m) => CliError::Usage(m),
            TrainError::NonFinite(m) => CliError::Numerical(m),
            TrainError::Io(source) => CliError::Io {
                path: PathBuf::from("<output>"),
                source,
            },
            other => CliError::Data(other.to_string()),
        }
    }
}
