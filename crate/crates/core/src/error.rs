use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate pose: {0}")]
    DegeneratePose(String),

    #[error("training diverged at step {step}: loss is not finite")]
    Divergence { step: usize },

    #[error("{what} is empty")]
    Empty { what: &'static str },

    #[error("point ({x:.3}, {y:.3}) is outside the grid")]
    OutOfBounds { x: f64, y: f64 },

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported format version {found} (expected {expected})")]
    Version { expected: u32, found: u32 },

    #[error("truncated file: {0}")]
    Truncated(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::File { path: path.into(), source }
    }
}
