use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected:?} (height, width), got {found:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("{what} must lie in [0, 1], got {value}")]
    Domain { what: &'static str, value: f64 },

    #[error("invalid value {value} at pixel {index}: {reason}")]
    InvalidPixel {
        index: usize,
        value: f64,
        reason: &'static str,
    },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("duplicate image id `{0}`")]
    DuplicateId(String),

    #[error("image `{image_id}` carries a {found} record, expected {expected}")]
    MixedMetric {
        image_id: String,
        expected: String,
        found: String,
    },

    #[error("unknown metric `{0}`")]
    UnknownMetric(String),

    #[error("invalid fraction grid: {0}")]
    InvalidFractions(String),

    #[error("retained set is empty at fraction {fraction} of {total} images")]
    EmptyRetained { fraction: f64, total: usize },

    #[error("curve `{label}` uses a different fraction grid from the first curve")]
    FractionGridMismatch { label: String },

    #[error("invalid phantom: {0}")]
    InvalidPhantom(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("bad magic at offset 0: expected {expected:?}, found {found:?}")]
    BadMagic { expected: String, found: String },

    #[error("unsupported version {found} at offset 4 (expected {expected})")]
    UnsupportedVersion { expected: u32, found: u32 },

    #[error("truncated {what}: need {needed} bytes, file has {actual}")]
    Truncated {
        what: &'static str,
        needed: usize,
        actual: usize,
    },

    #[error("declared dimensions imply {declared} payload bytes but file carries {actual}")]
    PayloadLength { declared: usize, actual: usize },

    #[error("value {value} at index {index} is outside [0, 1]")]
    OutOfRange { index: usize, value: f64 },

    #[error("non-binary mask byte {value} at pixel {index}")]
    NonBinaryMask { index: usize, value: u8 },

    #[error("{path}: missing or wrong header, expected `{expected}`")]
    MissingHeader { path: PathBuf, expected: String },

    #[error("{path}: no images")]
    NoImages { path: PathBuf },

    #[error("image `{image_id}`: cannot read {path}")]
    MissingFile { image_id: String, path: PathBuf },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
