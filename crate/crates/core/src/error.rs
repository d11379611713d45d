use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A numerical routine could not produce a valid result.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// The configuration file could not be parsed.
    #[error("config error: {0}")]
    Config(String),

    /// Parsed configuration values violate a model invariant.
    #[error("invalid parameter: {0}")]
    Invariant(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn invariant(msg: impl Into<String>) -> Self {
        Error::Invariant(msg.into())
    }

    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Domain(_) | Error::Invariant(_) | Error::Numerical(_) => 3,
            Error::Io { .. } => 4,
        }
    }
}
