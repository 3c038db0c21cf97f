//! Crate-wide error type.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed volume file header; `line` is the 1-based header line.
    #[error("volume format error at line {line}: {msg}")]
    VolumeFormat { line: usize, msg: String },

    /// Header promises a different payload size than the file carries.
    #[error("volume payload length mismatch: expected {expected} bytes, got {actual}")]
    PayloadLength { expected: usize, actual: usize },

    #[error("non-finite payload value at voxel {index}")]
    NonFinitePayload { index: usize },

    #[error("mask payload value {value} at voxel {index} is not 0 or 1")]
    InvalidMaskValue { index: usize, value: u8 },

    /// Malformed feature CSV; `line` is the 1-based file line.
    #[error("feature csv error at line {line}: {msg}")]
    CsvFormat { line: usize, msg: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("missing config key: {0}")]
    MissingConfigKey(String),

    #[error("budget exceeds pool size (m={m}, pool={n})")]
    Budget { m: usize, n: usize },

    #[error("unknown strategy: {0}")]
    UnknownStrategy(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("non-finite voxel at index {index}")]
    NonFiniteVoxel { index: usize },

    #[error("expected {expected} volume, got {actual}")]
    KindMismatch {
        expected: &'static str,
        actual: &'static str,
    },

    #[error("dimension mismatch: {0}")]
    DimMismatch(String),

    #[error("roi out of bounds: {0}")]
    Bounds(String),

    #[error("mask has no foreground voxels")]
    EmptyForeground,

    #[error("prediction stack needs at least 2 runs, got {got}")]
    InsufficientRuns { got: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// BIRCH produced fewer leaf entries than requested clusters.
    #[error(
        "birch threshold too coarse: {entries} leaf entries for k={k}; use a smaller threshold"
    )]
    ThresholdTooCoarse { entries: usize, k: usize },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("synthetic spec error: {0}")]
    Spec(String),

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("local roi mode requires ground-truth masks")]
    MissingMasks,

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors callers caused by passing bad parameters rather than
    /// bad data; the CLI maps these to its usage exit code.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::MissingConfigKey(_)
                | Error::Budget { .. }
                | Error::UnknownStrategy(_)
        )
    }
}
