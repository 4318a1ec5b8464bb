use thiserror::Error;

/// Errors produced by the numerical core and the experiment runner.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degree {degree} exceeds the supported maximum {max}")]
    DegreeTooLarge { degree: usize, max: usize },

    #[error("grid of dimension {dim} and degree {degree} exceeds {cap} points")]
    GridTooLarge { dim: usize, degree: usize, cap: usize },

    #[error("invalid dimension {0}")]
    InvalidDimension(usize),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("axis {axis} out of range for dimension {dim}")]
    AxisOutOfRange { axis: usize, dim: usize },

    #[error("point coordinate {value} lies outside [-1, 1]")]
    OutOfDomain { value: f64 },

    #[error("non-finite network parameter at index {0}")]
    NonFiniteParameter(usize),

    #[error("forward tape was recorded for different parameters")]
    StaleTape,

    #[error("jet order mismatch: {0} vs {1}")]
    OrderMismatch(usize, usize),

    #[error("derivative order {order} exceeds the supported maximum {max}")]
    OrderTooLarge { order: usize, max: usize },

    #[error("activation {0} is not smooth enough for jet propagation")]
    UnsupportedActivation(&'static str),

    #[error("unknown problem '{0}'")]
    UnknownProblem(String),

    #[error("problem '{0}' has no analytic solution")]
    MissingGroundTruth(String),

    #[error("problem '{0}' has no inverse parameter")]
    NotInverse(String),

    #[error("Hermite index {0} out of range")]
    HermiteOutOfRange(usize),

    #[error("non-finite value encountered: {0}")]
    Divergence(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("assembled form of size {size} exceeds the cap {cap}")]
    AssemblyTooLarge { size: usize, cap: usize },

    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
