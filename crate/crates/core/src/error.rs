//! Error type shared across the crate.

use std::fmt;

/// Failure conditions surfaced by mesh construction, assembly and solvers.
#[derive(Debug)]
pub enum Error {
    /// A user-supplied parameter is out of range or inconsistent.
    InvalidParameter(String),
    /// A triangle or control volume degenerated to (near) zero measure.
    SingularGeometry(String),
    /// A factorization failed (not SPD where required, or singular pivot).
    FactorizationFailure(String),
    /// An estimate or reduction was requested on an empty data set.
    InsufficientData(String),
    /// A dense fallback was requested beyond the small-problem guard.
    SizeGuard(String),
    /// An iterative solve hit its iteration cap before reaching tolerance.
    NotConverged(String),
    /// Wrapped I/O failure from dump or report emission.
    Io(std::io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::SingularGeometry(msg) => write!(f, "singular geometry: {msg}"),
            Error::FactorizationFailure(msg) => write!(f, "factorization failure: {msg}"),
            Error::InsufficientData(msg) => write!(f, "insufficient data: {msg}"),
            Error::SizeGuard(msg) => write!(f, "size guard: {msg}"),
            Error::NotConverged(msg) => write!(f, "not converged: {msg}"),
            Error::Io(err) => write!(f, "io error: {err}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(err) => Some(err),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err)
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Prefixes the message with the pipeline stage that produced it.
    pub fn in_stage(self, stage: &str) -> Self {
        match self {
            Error::InvalidParameter(m) => Error::InvalidParameter(format!("{stage}: {m}")),
            Error::SingularGeometry(m) => Error::SingularGeometry(format!("{stage}: {m}")),
            Error::FactorizationFailure(m) => Error::FactorizationFailure(format!("{stage}: {m}")),
            Error::InsufficientData(m) => Error::InsufficientData(format!("{stage}: {m}")),
            Error::SizeGuard(m) => Error::SizeGuard(format!("{stage}: {m}")),
            Error::NotConverged(m) => Error::NotConverged(format!("{stage}: {m}")),
            Error::Io(e) => Error::Io(e),
        }
    }
}
