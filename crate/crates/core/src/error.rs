use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("n too small: need at least {min} nodes, got {got}")]
    TooFewNodes { min: usize, got: usize },

    #[error("radius must be positive and finite, got {0}")]
    BadRadius(f64),

    #[error("ball domain requires radius 1, got {0}")]
    BallRadius(f64),

    #[error("field does not live on the given grid")]
    GridMismatch,

    #[error("field length {got} does not match grid size {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("exponent q must satisfy 1 <= q < inf, got {0}")]
    BadExponent(f64),

    #[error("operation requires a {expected} domain")]
    WrongDomain { expected: &'static str },

    #[error("tridiagonal system is singular at row {row} (pivot {pivot})")]
    SingularSystem { row: usize, pivot: f64 },

    #[error("invalid value for `{key}`: {reason}")]
    InvalidParameter { key: String, reason: String },

    #[error("field is not radially non-increasing (first rise at node {index})")]
    NonMonotone { index: usize },

    #[error("shell mass A0 must be positive, got {0}")]
    NonPositiveShellMass(f64),

    #[error("initial data does not vanish near r = R: tail value {value:e} exceeds {limit:e}")]
    TailBreach { value: f64, limit: f64 },

    #[error("empty trajectory")]
    EmptyTrajectory,

    #[error("malformed configuration: {0}")]
    Config(String),

    #[error("snapshot version mismatch: expected {expected}, found {found}")]
    VersionMismatch { expected: u32, found: u32 },

    #[error("config hash mismatch: snapshot was written with {stored}, current config hashes to {current}")]
    HashMismatch { stored: String, current: String },

    #[error("corrupt snapshot: {0}")]
    CorruptSnapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(key: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            key: key.to_string(),
            reason: reason.into(),
        }
    }
}
