use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("Fock cutoff {cutoff} too small: {reason}")]
    CutoffTooSmall { cutoff: usize, reason: String },

    #[error("state invariant violated: {0}")]
    InvalidState(String),

    #[error("integration failed: {0}")]
    Integration(String),

    #[error("scan point {index}: {source}")]
    AtPoint {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("data mismatch: {0}")]
    DataMismatch(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// True for failures of the numerical machinery (cutoff, integrator)
    /// rather than bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::CutoffTooSmall { .. } | Error::Integration(_) | Error::InvalidState(_) => true,
            Error::AtPoint { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
