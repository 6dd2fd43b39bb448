use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the range the operation is defined on.
    #[error("domain error: {0}")]
    Domain(String),

    /// Building a pmf would need more support than the configured ceiling.
    #[error("truncation failed: {what} needs more than {ceiling} support points to leave tail mass < {eps_tail:e}")]
    Truncation {
        what: String,
        ceiling: usize,
        eps_tail: f64,
    },

    #[error("bracket error: target {target:e} outside [{lo:e}, {hi:e}]")]
    Bracket { target: f64, lo: f64, hi: f64 },

    #[error("rate is not monotone over the bracket: {0}")]
    NonMonotone(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
