use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("column {0} is identically zero")]
    ZeroColumn(usize),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid regression data: {0}")]
    InvalidData(String),
    #[error("lasso did not converge after {iterations} sweeps (kkt gap {kkt_gap:e})")]
    NotConverged { iterations: usize, kkt_gap: f64 },
    #[error("objective became non-finite")]
    NonFinite,
    #[error("degenerate response: {0}")]
    DegenerateResponse(String),
    #[error("penalty must be positive and finite, got {0}")]
    InvalidLambda(f64),
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("coordinate {0} out of range for p = {1}")]
    IndexOutOfRange(usize, usize),
    #[error("debiasing direction for coordinate {j} is degenerate (z_j'x_j = {denom:e})")]
    DegenerateDirection { j: usize, denom: f64 },
    #[error("fit is saturated: {support} active coefficients with n = {n}")]
    SaturatedFit { support: usize, n: usize },
    #[error("alpha must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),
    #[error("bootstrap refits failed on {failures} of {resamples} resamples")]
    TooManyRefitFailures { failures: usize, resamples: usize },
    #[error("no bootstrap draws")]
    EmptyDraws,
    #[error("noise scale is zero")]
    ZeroSigma,
    #[error("support Gram matrix is singular")]
    SingularSupportGram,
    #[error("covariance matrix is not positive definite")]
    SingularCovariance,
    #[error("support set is empty")]
    EmptySupport,
    #[error("all {0} replications failed")]
    AllReplicationsFailed(usize),
    #[error("{failed} of {total} replications failed, above the {ceiling} ceiling")]
    TooManyFailedReplications {
        failed: usize,
        total: usize,
        ceiling: f64,
    },
    #[error("config error: {0}")]
    Config(String),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
