use std::path::PathBuf;

use invsynth_core::Error as CoreError;

/// What went wrong, sorted into the classes the CLI turns into exit codes.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("{0}")]
    Data(CoreError),
    #[error("{method}: {source}")]
    Method {
        method: String,
        #[source]
        source: CoreError,
    },
    #[error("{0}")]
    Failed(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 1,
            Error::Io { .. } | Error::Format { .. } | Error::Data(_) => 2,
            Error::Method { .. } | Error::Failed(_) => 3,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Format { path: path.into(), message: message.to_string() }
    }

    /// Wrap a failure of `method`; bad parameters are still usage errors.
    pub fn method(method: &str, source: CoreError) -> Self {
        match source {
            CoreError::InvalidParameter(msg) => Error::Usage(msg),
            source => Error::Method { method: method.to_string(), source },
        }
    }
}

impl From<CoreError> for Error {
    fn from(e: CoreError) -> Self {
        Error::Data(e)
    }
}
