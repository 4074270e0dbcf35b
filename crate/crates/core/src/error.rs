use alloc::string::String;

/// Errors raised by geometric and statistical operations.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("point {point:?} is outside the domain of chart `{chart}`")]
    Domain { chart: String, point: alloc::vec::Vec<f64> },
    #[error("sample rejected: trajectory left the chart domain at step {step}")]
    Rejected { step: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("frame is rank deficient")]
    RankDeficient,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("cut locus: {0}")]
    CutLocus(String),
    #[error("estimation failed: {0}")]
    Estimation(String),
    #[error("zero density estimate for datum {index}")]
    ZeroDensity { index: usize },
    #[error("shooting did not converge after {iterations} iterations (residual {residual:e})")]
    Shooting { iterations: usize, residual: f64 },
    #[error("non-finite value: {0}")]
    NonFinite(String),
}

pub type Result<T> = core::result::Result<T, Error>;
