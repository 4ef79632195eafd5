use std::io;

use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid object: {0}")]
    InvalidObject(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid nonlinearity order {0} (expected 2 or 3)")]
    InvalidOrder(u8),

    #[error("length {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("degenerate range: input has no spread to normalize")]
    DegenerateRange,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("not normalized: {0}")]
    NotNormalized(String),

    #[error("no half-maximum crossing found on the {side} side of bin {peak}")]
    NoCrossing { side: &'static str, peak: usize },

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { expected: u16, found: u16 },

    #[error("truncated record at index {index}")]
    TruncatedRecord { index: usize },

    #[error("corrupt layer table at layer {layer}: {reason}")]
    CorruptLayerTable { layer: usize, reason: String },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("order mismatch: network handles order {network}, data has order {data}")]
    OrderMismatch { network: u8, data: u8 },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
