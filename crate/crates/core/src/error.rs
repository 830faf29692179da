use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension {0} is outside the supported range 2..=12")]
    InvalidDimension(usize),

    #[error("alpha = {alpha} must exceed -d = -{d}")]
    AlphaOutOfRange { alpha: f64, d: usize },

    #[error("threshold t = {0} must be non-negative")]
    NegativeThreshold(f64),

    #[error("expected dimension {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("linear system is numerically singular")]
    SingularConfiguration,

    #[error("vector is not of unit length (norm = {0})")]
    NotUnit(f64),

    #[error("vertex coincides with the nucleus")]
    ZeroVertex,

    #[error("ball pair violates delta^2 >= r'^2 - r^2 (delta = {delta}, r = {r}, r' = {r_prime})")]
    ConditionViolated { r: f64, r_prime: f64, delta: f64 },

    #[error("invalid ball pair: {0}")]
    InvalidBallPair(String),

    #[error("annulus [{r_in}, {r_out}] is empty")]
    EmptyAnnulus { r_in: f64, r_out: f64 },

    #[error("box corners must satisfy lo < hi componentwise")]
    BadBox,

    #[error("sampling radius would exceed the cap {cap}")]
    RadiusCapExceeded { cap: f64 },

    #[error("cell rejected after degenerate geometry ({0} degenerate tests)")]
    DegenerateCell(usize),

    #[error("{failed} of {reps} replicates failed buffer certification")]
    BufferTooSmall { failed: u64, reps: u64 },

    #[error("rho = {0} must exceed e")]
    BadRho(f64),

    #[error("threshold u = {u} is outside the admissible range: {reason}")]
    ThresholdOutOfRange { u: f64, reason: String },

    #[error("sample is empty")]
    EmptySample,

    #[error("degenerate events {degenerate} exceed 0.1% of {reps} replicates")]
    TooManyDegenerate { degenerate: u64, reps: u64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
