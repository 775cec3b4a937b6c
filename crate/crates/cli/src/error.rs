use std::path::PathBuf;

use extentlab::ErrorKind;
use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] extentlab::Error),
    #[error("{path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error("{path}, line {line}: {message}")]
    Row { path: PathBuf, line: u64, message: String },
    #[error("{path}: {message}")]
    Input { path: PathBuf, message: String },
    #[error("missing {what}: {path} not found (run `{producer}` first)")]
    MissingArtifact { what: &'static str, path: PathBuf, producer: &'static str },
    #[error("identity checks failed: {0}")]
    IdentityCheck(String),
    #[error("replay mismatch: {0}")]
    Replay(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    /// Process exit status: 2 validation, 3 numerical failure, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) => match e.kind() {
                ErrorKind::Validation => 2,
                ErrorKind::Numerical => 3,
                ErrorKind::Io => 4,
            },
            CliError::IdentityCheck(_) => 3,
            CliError::Io { .. } => 4,
            CliError::Config { .. }
            | CliError::Row { .. }
            | CliError::Input { .. }
            | CliError::MissingArtifact { .. }
            | CliError::Replay(_)
            | CliError::Other(_) => 2,
        }
    }

    pub fn category(&self) -> &'static str {
        match self.exit_code() {
            3 => "numerical",
            4 => "io",
            _ => "validation",
        }
    }
}
