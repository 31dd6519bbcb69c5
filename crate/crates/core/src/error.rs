use thiserror::Error;

/// Crate-wide error type. The CLI maps variants onto exit codes:
/// contract violations and config problems exit 2, file format and
/// I/O problems exit 3, numeric failures exit 4.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller broke an operation's precondition (bad shapes, bad
    /// arguments, invalid configuration).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error(transparent)]
    Format(#[from] FormatError),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Training or sampling produced a non-finite value.
    #[error("non-finite {quantity} at step {step}")]
    NonFinite { quantity: String, step: usize },
}

/// Parse-level failures for the on-disk dataset, checkpoint and CSV
/// formats. Kept separate from [`Error`] so callers can tell a
/// malformed file from a misused API.
#[derive(Debug, Error)]
pub enum FormatError {
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported format version {0}")]
    Version(u16),

    #[error("truncated payload: {0}")]
    Truncated(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("csv parse error at line {line}: {msg}")]
    Csv { line: usize, msg: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
}
