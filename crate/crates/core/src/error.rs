use std::io;

/// Errors raised across the segmentation pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("bandwidth must be at least 1, got {0}")]
    InvalidBandwidth(usize),

    #[error("bandwidth mismatch: {0}")]
    BandwidthMismatch(String),

    #[error("bandwidth {got} too small, need at least {min}")]
    BandwidthTooSmall { got: usize, min: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("spectrum violates real-signal conjugate symmetry (max deviation {0:e})")]
    SymmetryViolation(f64),

    #[error("non-finite activation after layer {0}")]
    NonFiniteActivation(usize),

    #[error("tape mismatch: {0}")]
    TapeMismatch(String),

    #[error("pointcloud is empty")]
    EmptyCloud,

    #[error("point {0} lies at the origin")]
    OriginPoint(usize),

    #[error("no valid (non-ignored) targets")]
    AllIgnored,

    #[error("label histogram is empty")]
    EmptyHistogram,

    #[error("confusion matrix is empty")]
    EmptyMatrix,

    #[error("item list is empty")]
    EmptyList,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("malformed file {path}: {reason}")]
    MalformedFile { path: String, reason: String },

    #[error("count mismatch: {points} points but {labels} labels")]
    CountMismatch { points: usize, labels: usize },

    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl Error {
    /// Stable machine-readable tag, used by the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidBandwidth(_) => "InvalidBandwidth",
            Error::BandwidthMismatch(_) => "BandwidthMismatch",
            Error::BandwidthTooSmall { .. } => "BandwidthTooSmall",
            Error::ShapeMismatch(_) => "ShapeMismatch",
            Error::SymmetryViolation(_) => "SymmetryViolation",
            Error::NonFiniteActivation(_) => "NonFiniteActivation",
            Error::TapeMismatch(_) => "TapeMismatch",
            Error::EmptyCloud => "EmptyCloud",
            Error::OriginPoint(_) => "OriginPoint",
            Error::AllIgnored => "AllIgnored",
            Error::EmptyHistogram => "EmptyHistogram",
            Error::EmptyMatrix => "EmptyMatrix",
            Error::EmptyList => "EmptyList",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::MalformedFile { .. } => "MalformedFile",
            Error::CountMismatch { .. } => "CountMismatch",
            Error::Io(_) => "Io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
