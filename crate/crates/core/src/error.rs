use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("simulation diverged: node {node} became non-finite at t = {time}")]
    SimulationDiverged { node: usize, time: f64 },

    #[error("insufficient history: need {needed} samples, have {available}")]
    InsufficientHistory { needed: usize, available: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("stale forward cache: model changed since the forward pass")]
    StaleCache,

    #[error("training diverged at epoch {epoch}: non-finite loss")]
    TrainingDiverged { epoch: usize },

    #[error("schema mismatch: expected {expected}, found {found}")]
    SchemaMismatch { expected: String, found: String },

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("feature `{0}` is constant and cannot be normalized")]
    ConstantFeature(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("dataset too small: {0}")]
    TooSmall(String),

    #[error("missing pipeline stage: {0}")]
    MissingStage(String),

    #[error("unsupported document: {0}")]
    Format(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
