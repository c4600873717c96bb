use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("series too short: need at least {needed} values, got {got}")]
    TooShort { needed: usize, got: usize },

    #[error("non-positive price {value} at index {index}")]
    NonPositivePrice { index: usize, value: f64 },

    #[error("value {value} at index {index} is outside the domain of the transform")]
    Domain { index: usize, value: f64 },

    #[error("intraday high below low at index {index}")]
    HighBelowLow { index: usize },

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("series lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("dates are not strictly increasing at index {index}")]
    UnsortedDates { index: usize },

    #[error("activity series does not overlap the trading calendar")]
    EmptyOverlap,

    #[error("degenerate sample: {0}")]
    Degenerate(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("singular design matrix: {0}")]
    Singular(String),

    #[error("optimizer failed: {0}")]
    NonConvergence(String),

    #[error("missing result for lag {0}")]
    MissingLag(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code for the CLI: 1 usage/config, 2 data, 3 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidParameter(_) => 1,
            Error::Degenerate(_) | Error::Singular(_) | Error::NonConvergence(_) => 3,
            _ => 2,
        }
    }

    /// True for failures that come from the numerics rather than the inputs.
    pub fn is_numerical(&self) -> bool {
        self.exit_code() == 3
    }
}
