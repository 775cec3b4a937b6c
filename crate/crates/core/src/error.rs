use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used by the command line to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Numerical,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{date} is not in the warm period")]
    NotInWarmPeriod { date: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("unknown region `{0}`")]
    UnknownRegion(String),
    #[error("region `{0}` has no member points")]
    EmptyRegion(String),
    #[error("invalid event: {0}")]
    InvalidEvent(String),
    #[error("empty period")]
    EmptyPeriod,
    #[error("misaligned periods: {0}")]
    MisalignedPeriods(String),
    #[error("cholesky factorization of {matrix} failed (relative jitter up to {max_jitter:e})")]
    Cholesky { matrix: String, max_jitter: f64 },
    #[error("non-finite value in block `{block}`: {detail}")]
    NonFinite { block: String, detail: String },
    #[error("malformed file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Cholesky { .. } | Error::NonFinite { .. } => ErrorKind::Numerical,
            Error::Io(_) => ErrorKind::Io,
            _ => ErrorKind::Validation,
        }
    }
}
