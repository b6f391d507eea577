use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),

    #[error("axis {axis} out of range for dimension {n}")]
    AxisOutOfRange { axis: usize, n: usize },

    #[error("invalid smoothing radius k={k} for m={m}: {reason}")]
    InvalidRadius { k: usize, m: usize, reason: &'static str },

    #[error("sgn is undefined at residue 0")]
    SignOfZero,

    #[error("exponent p={0} outside [1, 2]")]
    InvalidExponent(f64),

    #[error("norm exponent q={0} outside [1, inf]")]
    InvalidNormExponent(f64),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("table domain is not the hypercube (m={m}, expected 2)")]
    NotHypercube { m: usize },

    #[error("index bounds violated: {0}")]
    IndexBounds(String),

    #[error("instance too large for exact evaluation: {0}")]
    TooLarge(String),

    #[error("non-finite value in table at flat index {0}")]
    NonFinite(usize),

    /// lhs > 0 with rhs = 0: the evaluated inequality would be falsified.
    #[error("invariant violation in {evaluator}: lhs={lhs:e} > 0 but rhs=0")]
    InvariantViolation { evaluator: String, lhs: f64 },

    #[error("insufficient samples: got {got}, need at least {need}")]
    InsufficientSamples { got: usize, need: usize },

    #[error("feature matrix has rank 0")]
    RankZero,

    #[error("every optimizer start was degenerate")]
    AllStartsDegenerate,

    #[error("invalid optimizer config: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, LabError>;
