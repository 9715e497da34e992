use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("singular denominator: {0}")]
    Singularity(String),

    #[error("non-finite coefficient {what} at x = {x}, p = {p}")]
    NonFinite { what: &'static str, x: f64, p: f64 },

    #[error("time step {dt} violates the stability bound; use dt <= {suggested}")]
    TimeStep { dt: f64, suggested: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
