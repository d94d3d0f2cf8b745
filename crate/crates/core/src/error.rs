use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("kernel quadrature produced a non-finite value at cell ({row}, {col})")]
    Quadrature { row: usize, col: usize },

    #[error("option price {price} is below intrinsic value {intrinsic}")]
    BelowIntrinsic { price: f64, intrinsic: f64 },

    #[error("option price {price} is at or above the upper bound {bound}")]
    AboveUpperBound { price: f64, bound: f64 },

    #[error("implied volatility outside the search bracket [{lo}, {hi}]")]
    VolOutOfBracket { lo: f64, hi: f64 },

    #[error("degenerate rate function: Lambda*({x}) = 0 for nonzero x")]
    DegenerateRate { x: f64 },

    #[error("second-order expansion invalid: bracket argument {value} <= 0 (maturity too large)")]
    ExpansionDomain { value: f64 },

    #[error("covariance matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("unknown volatility descriptor `{0}`")]
    VolDescriptor(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
