use thiserror::Error;

#[derive(Debug, Error)]
pub enum LdError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("geometry is not admissible (H p q / pi must be a positive integer m with k_n = m n)")]
    InadmissibleGeometry,
    #[error("configuration does not match geometry: {0}")]
    ShapeMismatch(String),
    #[error("flux {found} deviates from 2 pi K = {expected}")]
    FluxMismatch { found: f64, expected: f64 },
    #[error("right-hand side has non-zero mean {mean:e}")]
    NonZeroMean { mean: f64 },
    #[error("brute force limited to N <= 4, got N = {0}")]
    DimensionTooLarge(usize),
    #[error("no convergence after {iterations} iterations (gradient {grad_norm:e}){}", at_r.map(|r| format!(" at r = {r}")).unwrap_or_default())]
    NoConvergence {
        iterations: usize,
        grad_norm: f64,
        at_r: Option<f64>,
    },
    #[error("need at least {needed} data points, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, LdError>;
