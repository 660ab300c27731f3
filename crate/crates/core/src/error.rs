use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("could not pair V2V receiver {pair} within {radius_m} m after {attempts} attempts")]
    PairingFailed {
        pair: usize,
        radius_m: f64,
        attempts: usize,
    },

    #[error("invalid decision: {0}")]
    InvalidDecision(String),

    #[error("no completed delivery attempts to compute success probability from")]
    NoDeliveryAttempts,

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("training diverged: {what} produced non-finite loss at step {step}")]
    Divergence { what: &'static str, step: u64 },

    #[error("invalid configuration at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("empty task set")]
    EmptyTaskSet,

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),

    #[error("missing file {0}")]
    MissingFile(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
