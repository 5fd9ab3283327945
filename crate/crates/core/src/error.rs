use thiserror::Error;

/// Errors raised by the numerical routines.
///
/// Each variant corresponds to one failure class; the CLI maps all of them
/// to the same "numeric/domain" exit status and prints the message.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("trajectory escaped the domain at t = {t}")]
    Escape { t: f64 },
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("orbit structure error: {0}")]
    OrbitStructure(String),
    #[error("degenerate orbit: {0}")]
    Degeneracy(String),
    #[error("orbit family broken across the stencil: {0}")]
    Family(String),
    #[error("wrong scaling kind: {0}")]
    WrongKind(String),
    #[error("singular scaling exponent for degree {0}")]
    SingularExponent(f64),
    #[error("orbit is not periodic (closure residual {0:e})")]
    NotPeriodic(f64),
    #[error("resolution error: {0}")]
    Resolution(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("scaled-variable map error: {0}")]
    Map(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
