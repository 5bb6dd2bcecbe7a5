use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("singular point: weight or function undefined at {0:?}")]
    SingularPoint(Vec<f64>),

    #[error("mass indistinguishable from zero on {region} (value {value:e}, std error {std_error:e})")]
    ZeroMass {
        region: String,
        value: f64,
        std_error: f64,
    },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("insufficient divergence within budget: {blocks} blocks found up to index {i_max}")]
    InsufficientDivergence { blocks: usize, i_max: i32 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidParameter(msg.into()))
}
