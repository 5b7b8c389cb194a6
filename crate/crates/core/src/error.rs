use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("numerical blow-up at iteration {iteration} (particle {particle})")]
    NumericalBlowup { iteration: usize, particle: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("degenerate front chart at r = {r}: |h'(r)| = {norm:e}")]
    DegenerateChart { r: f64, norm: f64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
