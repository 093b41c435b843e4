use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("range_min ({min}) must be strictly below range_max ({max})")]
    InvalidRange { min: f64, max: f64 },

    #[error("grid_count must be at least 1, got {0}")]
    InvalidGrid(usize),

    #[error("basis derivatives need degree >= 1")]
    UnsupportedDegree,

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("dimension mismatch: expected {expected} inputs, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid widths {0:?}: need at least two positive entries ending in 1")]
    InvalidWidths(Vec<usize>),

    #[error("label must be 0 or 1, got {0}")]
    InvalidLabel(u8),

    #[error("batch is empty")]
    EmptyBatch,

    #[error("input is empty")]
    EmptyInput,

    #[error("both classes must be present")]
    SingleClassInput,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("header mismatch: {0}")]
    HeaderMismatch(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("class {label} has {count} members, need at least 2")]
    ClassTooSmall { label: u8, count: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("points per edge must be at least 2, got {0}")]
    InvalidPointCount(usize),

    #[error("index {index} out of range for {len} rows")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("checkpoint mismatch: {0}")]
    CheckpointMismatch(String),

    #[error("invalid checkpoint: {0}")]
    Checkpoint(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),
}

impl Error {
    /// Stable machine-readable code, printed by the CLI.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidRange { .. } => "invalid-range",
            Error::InvalidGrid(_) => "invalid-grid",
            Error::UnsupportedDegree => "unsupported-degree",
            Error::LengthMismatch { .. } => "length-mismatch",
            Error::DimensionMismatch { .. } => "dimension-mismatch",
            Error::InvalidWidths(_) => "invalid-widths",
            Error::InvalidLabel(_) => "invalid-label",
            Error::EmptyBatch => "empty-batch",
            Error::EmptyInput => "empty-input",
            Error::SingleClassInput => "single-class-input",
            Error::Io { .. } => "io-error",
            Error::HeaderMismatch(_) => "header-mismatch",
            Error::Parse { .. } => "parse-error",
            Error::ClassTooSmall { .. } => "class-too-small",
            Error::ShapeMismatch(_) => "shape-mismatch",
            Error::InvalidPointCount(_) => "invalid-point-count",
            Error::IndexOutOfRange { .. } => "index-out-of-range",
            Error::CheckpointMismatch(_) => "checkpoint-mismatch",
            Error::Checkpoint(_) => "invalid-checkpoint",
            Error::InvalidConfig(_) => "invalid-config",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
