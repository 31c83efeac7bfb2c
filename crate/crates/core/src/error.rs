use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An input violates an operation's precondition.
    #[error("{0}")]
    Domain(String),
    /// The request would exceed a fixed size or memory budget.
    #[error("{0}")]
    Resource(String),
    /// Evaluation at an essential singularity of a formula.
    #[error("{0}")]
    Singularity(String),
    /// The request is outside what ordinary calculus can verify.
    #[error("{0}")]
    Unsupported(String),
    /// Quadrature or another numerical procedure failed to converge.
    #[error("{0}")]
    Numeric(String),
    /// Too little or unusable data for a regression.
    #[error("{0}")]
    Fit(String),
    #[error("{0}")]
    Io(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
