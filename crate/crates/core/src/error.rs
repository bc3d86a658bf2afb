use std::path::PathBuf;

/// Errors produced by the synthesis and metrics layers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A caller-supplied value violated an operation's precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A binary file did not match its declared layout.
    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    /// An invariant that upstream stages should have guaranteed was broken.
    #[error("internal error: {0}")]
    Internal(String),

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("manifest error: {0}")]
    Manifest(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors that stem from bad input rather than the environment.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
