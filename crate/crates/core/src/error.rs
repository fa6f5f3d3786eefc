use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GzError {
    #[error("ambient size mismatch: {left} vs {right}")]
    AmbientMismatch { left: usize, right: usize },

    #[error("invalid ambient size {0}")]
    InvalidSize(usize),

    #[error("index ({row}, {col}) out of range for N = {n}")]
    IndexOutOfRange { row: usize, col: usize, n: usize },

    #[error("non-finite value while differentiating {0}")]
    NonFinite(String),

    #[error("point is degenerate: {0}")]
    Degenerate(String),

    #[error("spectrum entries {0} and {1} are closer than the gap threshold")]
    RepeatedSpectrum(usize, usize),

    #[error("retry budget of {0} exhausted while sampling a regular point")]
    RetryExhausted(usize),

    #[error("Gelfand-Zetlin chart is singular at level {level}: {reason}")]
    SingularChart { level: usize, reason: String },

    #[error("root tracking ambiguous at level {level}")]
    TrackingAmbiguous { level: usize },

    #[error("polynomial is not square-free (roots {0} and {1} collide)")]
    NotSquareFree(usize, usize),

    #[error("integration path passes through a puncture at {0}")]
    PathThroughPuncture(String),

    #[error("regularity lost at t = {time}: {reason}")]
    RegularityLost { time: f64, reason: String },

    #[error("branch jump in tau at t = {time}")]
    BranchJump { time: f64 },

    #[error("invalid specification: {0}")]
    InvalidSpec(String),
}

pub type Result<T> = std::result::Result<T, GzError>;
