use std::fmt;
use std::path::PathBuf;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes surfaced by the library.
#[derive(Debug)]
pub enum Error {
    /// Matrix shape mismatch; names the operation and both shapes.
    Shape {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },
    /// A numeric quantity became NaN/Inf or a numeric check failed.
    Numeric(String),
    /// I/O failure tied to a path.
    Io { path: PathBuf, source: std::io::Error },
    /// Malformed on-disk data; names the file and where parsing stopped.
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },
    /// Bad configuration: unknown key, unparsable value, invalid combination.
    Config(String),
    /// Invalid input to an operation (empty sequence, missing label, ...).
    Input(String),
    /// Checkpoint file problems: bad magic, truncation, vocabulary mismatch.
    Checkpoint(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Shape { op, lhs, rhs } => write!(
                f,
                "shape mismatch in {op}: {}x{} vs {}x{}",
                lhs.0, lhs.1, rhs.0, rhs.1
            ),
            Error::Numeric(msg) => write!(f, "numeric failure: {msg}"),
            Error::Io { path, source } => write!(f, "io error on {}: {source}", path.display()),
            Error::Format { path, line, message } => {
                write!(f, "format error in {} at line {line}: {message}", path.display())
            }
            Error::Config(msg) => write!(f, "config error: {msg}"),
            Error::Input(msg) => write!(f, "input error: {msg}"),
            Error::Checkpoint(msg) => write!(f, "checkpoint error: {msg}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io { source, .. } => Some(source),
            _ => None,
        }
    }
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn format(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Format { path: path.into(), line, message: message.into() }
    }
}
