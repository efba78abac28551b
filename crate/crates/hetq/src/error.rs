use std::path::PathBuf;

/// Errors raised by the file formats, config loading and the CLI.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] hetq_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error("{0}")]
    Usage(String),
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Self::Core(hetq_core::Error::Format(msg.into()))
    }

    /// Process exit status: 2 usage, config or validation; 3 format or I/O; 4 infeasible.
    pub fn exit_code(&self) -> i32 {
        use hetq_core::Error as C;
        match self {
            Error::Core(C::Config(_) | C::Validation(_)) => 2,
            Error::Core(C::Format(_)) => 3,
            Error::Core(C::Infeasible(_)) => 4,
            Error::Config { .. } | Error::Usage(_) => 2,
            Error::Io { .. } | Error::Csv(_) | Error::Json(_) => 3,
        }
    }
}
