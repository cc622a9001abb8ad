use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain half-width {0} is below 1: sine basis sup-norm would exceed 1")]
    DomainTooSmall(f64),

    #[error("grid needs at least 3 interior points, got {0}")]
    TooFewPoints(usize),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("numerical blow-up at t = {t}: non-finite field values")]
    BlowUp { t: f64 },

    #[error("time partitions do not match: {0}")]
    PartitionMismatch(String),

    #[error("Picard iteration diverged after {iterations} iterations (residual {residual:e})")]
    Divergence { iterations: usize, residual: f64 },

    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("missing required config key `{0}`")]
    MissingKey(&'static str),

    #[error("regime violated: {0}")]
    Regime(String),

    #[error("snapshot format: {0}")]
    Format(String),

    #[error("insufficient data: {0}")]
    Insufficient(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
