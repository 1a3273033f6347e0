use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("y4m parse error at byte {offset}: {message}")]
    Y4mParse { offset: u64, message: String },

    #[error("y4m stream truncated in frame {frame_index}")]
    Y4mTruncated { frame_index: usize },

    #[error("unsupported bit depth {0}; only 8-bit video is supported")]
    UnsupportedBitDepth(u32),

    #[error("no frames matching `{pattern}` in {dir}")]
    NoFrames { dir: PathBuf, pattern: String },

    #[error("frame {path} is {found_w}x{found_h}, expected {expected_w}x{expected_h}")]
    MixedResolution {
        path: PathBuf,
        found_w: usize,
        found_h: usize,
        expected_w: usize,
        expected_h: usize,
    },

    #[error("png error in {path}: {message}")]
    Png { path: PathBuf, message: String },

    #[error("invalid frame: {0}")]
    InvalidFrame(String),

    #[error("invalid clip: {0}")]
    InvalidClip(String),

    #[error("region {x},{y} {w}x{h} does not fit a {width}x{height} frame{detail}")]
    RegionOutOfBounds {
        x: usize,
        y: usize,
        w: usize,
        h: usize,
        width: usize,
        height: usize,
        detail: &'static str,
    },

    #[error("unsupported conversion: {0}")]
    UnsupportedConversion(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("provider error ({provider}): {diagnostics}")]
    Provider {
        provider: String,
        diagnostics: String,
    },

    #[error("tool not found: {0}")]
    ToolNotFound(String),

    #[error("feature `{feature}`: {source}")]
    Feature {
        feature: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("non-finite feature values in sample(s) {0:?}")]
    NonFiniteSamples(Vec<usize>),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("zero variance: {0}")]
    ZeroVariance(String),

    #[error("vote references unknown pair {0}")]
    UnknownPair(String),

    #[error("comparison graph is disconnected; components: {0:?}")]
    DisconnectedGraph(Vec<Vec<String>>),

    #[error("infeasible schedule: {0}")]
    InfeasibleSchedule(String),

    #[error("no common quality range between `{test}` and `{reference}`")]
    NoCommonQualityRange { test: String, reference: String },

    #[error("invalid rd curve `{label}`: {message}")]
    InvalidCurve { label: String, message: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn feature(feature: &'static str, source: Error) -> Self {
        Error::Feature {
            feature,
            source: Box::new(source),
        }
    }
}
