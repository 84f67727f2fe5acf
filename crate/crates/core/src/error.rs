use thiserror::Error;

/// Errors raised by the reconstruction library.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration value (resolution, time grid, bounds, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// An operation was called with arguments that do not fit together,
    /// e.g. fields living on different meshes.
    #[error("usage error: {0}")]
    Usage(String),

    /// A linear solve failed during time marching.
    #[error("solver failure: {0}")]
    Solver(String),

    /// Strict config parser failure, carrying the offending line.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
