use alloc::string::String;

/// Errors produced by the core engine.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("rotation is not orthonormal with determinant +1 (max deviation {deviation:e})")]
    NotOrthonormal { deviation: f64 },
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(&'static str),
    #[error("point is at or behind the optical plane")]
    Behind,
    #[error("optical axis is within 1 degree of the frame's vertical axis")]
    DegeneratePose,
    #[error("non-finite value")]
    NonFinite,
    #[error("invalid grid: {0}")]
    InvalidGrid(&'static str),
    #[error("cell index ({ix}, {iy}) out of range for a {nx}x{ny} grid")]
    IndexOutOfRange { ix: usize, iy: usize, nx: usize, ny: usize },
    #[error("mask shape mismatch: {0}")]
    MaskShapeMismatch(String),
    #[error("every camera is masked out; at least one must be active")]
    AllCamerasMasked,
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("pixel ({u}, {v}) outside image bounds")]
    OutOfBounds { u: f64, v: f64 },
    #[error("position encoding needs an even channel count, got {0}")]
    OddChannels(usize),
    #[error("feature maps disagree on channel count ({expected} vs {actual})")]
    ChannelMismatch { expected: usize, actual: usize },
    #[error("no feature map for camera {0}")]
    MissingFeatureMap(usize),
    #[error("infeasible layout: {0}")]
    InfeasibleLayout(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("category has no ground truth")]
    NoGroundTruth,
}

pub type Result<T> = core::result::Result<T, Error>;
