use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid range: lo={lo} must be < hi={hi}")]
    InvalidRange { lo: f64, hi: f64 },
    #[error("invalid distribution parameter: {0}")]
    InvalidParameter(String),
    #[error("arm {arm} has no observations yet")]
    UninitializedArm { arm: usize },
    #[error("arm index {arm} out of range for {arms} arms")]
    ArmOutOfRange { arm: usize, arms: usize },
    #[error("empty score set")]
    EmptyScores,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("reward {0} is not in {{0, 1}}")]
    NonBinaryReward(f64),
    #[error("environment exhausted after {0} steps")]
    Exhausted(usize),
    #[error("ingestion error at row {row}: {message}")]
    Ingest { row: usize, message: String },
    #[error("config error: {0}")]
    Config(String),
    #[error("ragged horizons: expected {expected}, got {got}")]
    RaggedHorizons { expected: usize, got: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Errors that stem from a bad configuration rather than a runtime failure.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}
