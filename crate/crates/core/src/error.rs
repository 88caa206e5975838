use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("factor index {index} out of range for a {d}-parameter grid")]
    FactorIndex { index: usize, d: usize },

    #[error("level {level} out of range 0..={max} for factor {factor}")]
    LevelOutOfRange {
        factor: usize,
        level: usize,
        max: usize,
    },

    #[error("rectangle {0} is not eligible for a difference operator (a cube sits at the finest level)")]
    IneligibleRectangle(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("{what}: {count} exceeds the configured cap of {cap}{hint}")]
    ResourceLimit {
        what: &'static str,
        count: usize,
        cap: usize,
        hint: &'static str,
    },

    #[error("empty open set: the packing ratio needs |Ω| > 0")]
    EmptyMask,

    #[error("operation needs at least two parameters (d = {0})")]
    NeedsMultiparameter(usize),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("contraction failure: measured ratio {ratio:.4} with c = {c:.3e} stays above q = {q}; lower c or raise q")]
    ContractionFailure { ratio: f64, c: f64, q: f64 },

    #[error("weight must be strictly positive (cell {cell} has value {value})")]
    NonPositiveWeight { cell: usize, value: f64 },

    #[error("invalid shift: {0}")]
    InvalidShift(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}
