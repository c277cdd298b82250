use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid time domain [{t1}, {t2}]: need finite t1 < t2")]
    InvalidDomain { t1: f64, t2: f64 },

    #[error("invalid point process: {0}")]
    InvalidProcess(String),

    #[error("contrast matrix needs k >= 1")]
    EmptyContrast,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// The ILR transform is undefined when some inter-event time is zero.
    #[error("inter-event time {index} is not strictly positive ({value})")]
    Boundary { index: usize, value: f64 },

    #[error("inter-event times sum to {got}, expected {expected}")]
    TotalMismatch { expected: f64, got: f64 },

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("singular matrix in normalizing constant")]
    Singular,

    #[error("empty distribution")]
    EmptyDistribution,

    #[error("invalid intensity: {0}")]
    InvalidIntensity(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A sampler observed an intensity above its declared bound.
    #[error("intensity {value} exceeds bound {bound} at t = {t}")]
    BoundViolation { t: f64, value: f64, bound: f64 },

    #[error("realizations do not share one time domain")]
    MismatchedDomains,

    #[error("no events in sample")]
    NoEvents,
}
