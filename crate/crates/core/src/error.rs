use thiserror::Error;

/// Errors produced by the library. One enum for the whole crate; the CLI maps
/// every variant to exit code 2.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("site index {index} out of range for {n_sites} sites")]
    IndexOutOfRange { index: usize, n_sites: usize },

    #[error("self-coupling on site {0}")]
    SelfCoupling(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("spin value {0} is not +1 or -1")]
    InvalidSpin(i64),

    #[error("{n_sites} sites exceeds the cap of {cap}")]
    TooLarge { n_sites: usize, cap: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty configuration set")]
    EmptySet,

    #[error("function is not Lipschitz with the given bound on the set: {0}")]
    NotLipschitz(String),

    #[error("polynomial degree {degree} exceeds the supported maximum {max}")]
    DegreeTooHigh { degree: usize, max: usize },

    #[error("model is not contracting (Dobrushin margin {0})")]
    NotContracting(f64),

    #[error("tail grid too deep: r = {r} rests on {exceedances} exceedances (need at least {required})")]
    GridTooDeep {
        r: f64,
        exceedances: usize,
        required: usize,
    },

    #[error("insufficient points for fit: {found} usable, need {required}")]
    InsufficientPoints { found: usize, required: usize },

    #[error("empty sample batch")]
    EmptyBatch,

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
