use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter outside the domain of the quantity being computed.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    /// The discretised kernel lost more mass than tolerated, or the spacing
    /// does not resolve the increment law.
    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("model mismatch: {0}")]
    ModelMismatch(String),

    #[error("regime mismatch: {0}")]
    RegimeMismatch(String),

    /// Too few samples survived the conditioning to form an estimate.
    #[error("degenerate conditioning: {0}")]
    Degenerate(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Numerical diagnostics are distinguished from input validation so that
    /// callers (the CLI in particular) can report them differently.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::GridTooCoarse(_) | Error::Degenerate(_))
    }
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
