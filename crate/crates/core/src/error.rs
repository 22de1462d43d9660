use thiserror::Error;

/// Errors produced by the market-based moment engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty window")]
    EmptyWindow,

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("invalid window: {0}")]
    InvalidWindow(String),

    #[error("invalid trade at tick {tick}: {reason}")]
    InvalidTick { tick: usize, reason: String },

    #[error("invalid scale {0}: must be finite and > 0")]
    InvalidScale(f64),

    #[error("invalid reference price {0}: must be finite and > 0")]
    InvalidReferencePrice(f64),

    #[error("moment order must be >= 1")]
    InvalidMomentOrder,

    #[error("window mismatch between '{left}' ({left_n} ticks) and '{right}' ({right_n} ticks)")]
    WindowMismatch {
        left: String,
        left_n: usize,
        right: String,
        right_n: usize,
    },

    #[error("degenerate normalization: {0}")]
    DegenerateNormalization(String),

    #[error("singular joint volume moment: 1 + chi = {0}")]
    SingularJointVolume(f64),

    #[error("invalid holding for '{security}': {reason}")]
    InvalidHolding { security: String, reason: String },

    #[error("portfolio has no securities")]
    EmptyPortfolio,

    #[error("security '{0}' has zero traded volume in the window")]
    ZeroTradedVolume(String),

    #[error("security set mismatch: {0}")]
    SecuritySetMismatch(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("matrix is not symmetric: |m[{row}][{col}] - m[{col}][{row}]| = {gap:e}")]
    AsymmetricMatrix { row: usize, col: usize, gap: f64 },

    #[error("tick index {index} out of range for window of {len} ticks")]
    TickOutOfRange { index: usize, len: usize },

    #[error("internal consistency failure in {quantity}: {left} vs {right}")]
    InternalInconsistency {
        quantity: &'static str,
        left: f64,
        right: f64,
    },

    #[error("unaligned grid: missing ticks {0}")]
    UnalignedGrid(String),

    #[error("row {row}: {reason}")]
    InvalidRow { row: usize, reason: String },

    #[error("invalid range: {0}")]
    InvalidRange(String),

    #[error("empty campaign")]
    EmptyCampaign,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
