use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("spectrum is not Hermitian (max asymmetry {0:e})")]
    NonHermitian(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("band index {index} out of range 0..={max}")]
    BandOutOfRange { index: usize, max: usize },

    #[error("cube does not intersect the grid")]
    EmptyCube,

    #[error("empty cube family: {0}")]
    EmptyFamily(String),

    #[error("inner cube is not contained in the outer cube")]
    NotNested,

    #[error("insufficient resolution: {0}")]
    InsufficientResolution(String),

    #[error("gradient floor breached at t = {time}: min v = {min_v}")]
    GradientFloorBreached { time: f64, min_v: f64 },

    #[error("malformed field file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
