use thiserror::Error;

/// Errors raised by the library. The CLI maps each variant to an exit code.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("grid too small: n = {0}, need at least {min}", min = crate::numerics::MIN_NODES)]
    GridTooSmall(usize),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch between operands")]
    GridMismatch,

    #[error("parity violation: {0}")]
    Parity(String),

    #[error("derivative order {0} is not supported")]
    DerivativeOrder(usize),

    #[error("no sign change on [{a}, {b}]")]
    NoSignChange { a: f64, b: f64 },

    #[error("tolerance must be positive, got {0}")]
    Tolerance(f64),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
