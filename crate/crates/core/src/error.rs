use thiserror::Error;

/// Failure classes shared by every module in the crate.
///
/// The CLI maps each variant onto a distinct exit code, so new variants
/// should only be added for genuinely new failure classes.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A caller broke an operation's precondition (shapes, indices).
    #[error("contract violation: {0}")]
    Contract(String),
    /// Values that can never be valid, such as NaN or infinite entries.
    #[error("invalid input: {0}")]
    Input(String),
    /// Invalid configuration or distribution parameters.
    #[error("configuration error: {0}")]
    Config(String),
    /// Malformed or inconsistent data files.
    #[error("data error: {0}")]
    Data(String),
    /// A factorisation did not converge or produced non-finite output.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }
}
