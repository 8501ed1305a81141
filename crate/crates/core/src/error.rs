use thiserror::Error;

/// Errors raised by the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("level error: {0}")]
    Level(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("index {index} at level {level} is zero-affected; route it through the local system")]
    ZeroAffectedIndex { level: u32, index: usize },

    #[error("design point {x} has zero density inside the support of a zero-free basis function")]
    ZeroDensityPoint { x: f64 },

    #[error("sample too small: {0}")]
    SampleSize(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("wrong regime: {0}")]
    Regime(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("input error: {0}")]
    Input(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
