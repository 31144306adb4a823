use thiserror::Error;

/// Errors produced by the sliding windows regression toolkit.
#[derive(Debug, Error)]
pub enum SwrError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("series too short: need at least {needed} points, got {got}")]
    SeriesTooShort { needed: usize, got: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("non-stationary AR({order}) estimate: root {re:.6}{im:+.6}i has modulus {modulus:.6}")]
    NonStationary { order: usize, re: f64, im: f64, modulus: f64 },

    #[error("optimizer failure: {0}")]
    Optimizer(String),

    #[error("training failed at iteration {iteration}: {reason}")]
    Training { iteration: usize, reason: String, partial: Vec<crate::train::IterationRecord> },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SwrError>;
