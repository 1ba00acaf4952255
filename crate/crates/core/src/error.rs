use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value is out of range or inconsistent.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// The request exceeds a size cap (generation, dense dimension, steps).
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// A graph document could not be parsed or violates a graph invariant.
    #[error("format error at {location}: {message}")]
    Format { location: String, message: String },

    /// An internal precondition was violated (dimension mismatch, non-unitary input).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Conditioning on a projection whose success probability is numerically zero.
    #[error("degenerate projection: success probability {0:e}")]
    DegenerateProjection(f64),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn format(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            location: location.into(),
            message: message.into(),
        }
    }
}
