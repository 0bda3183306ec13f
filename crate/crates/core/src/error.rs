//! Error type shared across the crate.

use std::fmt;

/// Errors surfaced by the library. The CLI maps these onto process exit
/// codes (config 2, numerical 3, I/O 4).
#[derive(Debug)]
pub enum Error {
    /// Matrix/vector dimensions do not line up.
    Shape(String),
    /// Invalid input data (bad labels, too few points, ...).
    Input(String),
    /// Invalid or inconsistent configuration.
    Config(String),
    /// Parse failure in a data or config file, with 1-based line number.
    Parse { line: usize, message: String },
    /// Loss or gradient turned non-finite during training.
    Numerical(String),
    /// An API contract was violated (e.g. backward with a stale cache).
    Contract(String),
    Io(std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Shape(m) => write!(f, "shape error: {m}"),
            Error::Input(m) => write!(f, "input error: {m}"),
            Error::Config(m) => write!(f, "config error: {m}"),
            Error::Parse { line, message } => write!(f, "parse error at line {line}: {message}"),
            Error::Numerical(m) => write!(f, "numerical failure: {m}"),
            Error::Contract(m) => write!(f, "contract violation: {m}"),
            Error::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}
