use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure class, used by front-ends to choose an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad parameters or shapes supplied by the caller.
    Invalid,
    /// Filesystem or file-format problems.
    Io,
    /// The numerics could not produce an answer.
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite sample at index {index}")]
    NonFinite { index: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("bad magic {found:?}, expected {expected:?}")]
    BadMagic { found: [u8; 4], expected: [u8; 4] },

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("payload length {found} bytes does not match header ({expected} bytes)")]
    PayloadMismatch { expected: usize, found: usize },

    #[error("malformed csv: {0}")]
    Csv(String),

    #[error("regression is underdetermined: {pixels} pixels for {bands} bands")]
    Underdetermined { pixels: usize, bands: usize },

    #[error("matrix is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("negative input {value} at band {band}, pixel {pixel}")]
    NegativeInput { band: usize, pixel: usize, value: f64 },

    #[error("zero denominator: {0}")]
    ZeroDenominator(String),

    #[error("degenerate covariance: {0}")]
    DegenerateCovariance(String),

    #[error("solver diverged at iteration {iteration}")]
    Diverged { iteration: usize },

    #[error("denoiser failed on eigen-image {row}: {message}")]
    Denoiser { row: usize, message: String },

    #[error("roc curve needs both classes (positives {positives}, negatives {negatives})")]
    SingleClass { positives: usize, negatives: usize },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::DimensionMismatch(_)
            | Error::InvalidParameter(_)
            | Error::NonFinite { .. }
            | Error::NegativeInput { .. }
            | Error::SingleClass { .. }
            | Error::Underdetermined { .. } => ErrorKind::Invalid,
            Error::Io { .. }
            | Error::BadMagic { .. }
            | Error::MalformedHeader(_)
            | Error::Truncated { .. }
            | Error::PayloadMismatch { .. }
            | Error::Csv(_) => ErrorKind::Io,
            Error::NotPositiveDefinite { .. }
            | Error::ZeroDenominator(_)
            | Error::DegenerateCovariance(_)
            | Error::Diverged { .. }
            | Error::Denoiser { .. } => ErrorKind::Numerical,
        }
    }
}
