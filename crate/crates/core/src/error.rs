use thiserror::Error;

/// Errors raised by the low-rank integration stack.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("ill-conditioned sample block (condition estimate {condition:.3e})")]
    IllConditionedSamples { condition: f64 },

    #[error("degenerate basis: zero interpolation residual at selection step {step}")]
    DegenerateBasis { step: usize },

    #[error("requested {requested} sample indices but the dimension is only {available}")]
    TooManySamples { requested: usize, available: usize },

    #[error("invalid index set: {0}")]
    InvalidIndex(String),

    #[error("cannot truncate a rank-{rank} state to rank {requested}")]
    InvalidTruncation { rank: usize, requested: usize },

    #[error("all singular values are zero")]
    ZeroState,

    #[error("CUR core matrix is singular")]
    SingularCore,

    #[error("model blowup at t = {t}: non-finite values at (row, col) {indices:?}")]
    ModelBlowup { t: f64, indices: Vec<(usize, usize)> },

    #[error("baseline coupling matrix is singular (condition {condition:.3e}) at t = {t}")]
    BaselineSingular { t: f64, condition: f64 },

    #[error("reference matrix has zero norm")]
    ZeroReference,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

pub type Result<T> = std::result::Result<T, Error>;
