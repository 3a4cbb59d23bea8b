use std::path::PathBuf;

/// Errors surfaced by the library and the command-line front end.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A configuration or argument violates a documented invariant.
    #[error("configuration error: {0}")]
    Config(String),

    /// A caller broke an operation's precondition (for example, scoring a
    /// rollout whose reward was never set).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A numeric routine could not produce a meaningful answer.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// A text file did not match its documented format.
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 1 for validation failures, 2 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parse { .. } => 1,
            Error::Contract(_) | Error::Numeric(_) | Error::Io { .. } => 2,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
