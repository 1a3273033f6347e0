use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, BenchError>;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("config error: {0}")]
    Config(String),

    #[error("config parse error in {path}: {message}")]
    ConfigParse { path: PathBuf, message: String },

    #[error("{tool} exited with {status}: {stderr}")]
    ToolFailed { tool: String, status: String, stderr: String },

    #[error("tool not found: {0}")]
    ToolNotFound(String),

    #[error("frame count mismatch: expected {expected}, found {found} in {dir}")]
    FrameCountMismatch { expected: usize, found: usize, dir: PathBuf },

    #[error("{stage} `{label}` skipped: upstream job failed")]
    UpstreamFailed { stage: &'static str, label: String },

    #[error("invalid report: {0}")]
    InvalidReport(String),

    #[error(transparent)]
    Core(#[from] srvqa_core::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
