use thiserror::Error;

/// Errors raised across the toolkit.
///
/// The variant names double as the machine-readable error kind printed by the CLI.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Shape(String),
    #[error("{0}")]
    Numeric(String),
    #[error("{0}")]
    Domain(String),
    #[error("{0}")]
    Singular(String),
    #[error("{0}")]
    Ingest(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short tag identifying the error family.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Shape(_) => "shape",
            Error::Numeric(_) => "numeric",
            Error::Domain(_) => "domain",
            Error::Singular(_) => "singular",
            Error::Ingest(_) => "ingest",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}
