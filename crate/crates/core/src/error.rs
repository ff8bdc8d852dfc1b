use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to decode image {path}: {message}")]
    Decode { path: PathBuf, message: String },

    #[error("failed to encode image {path}: {message}")]
    Encode { path: PathBuf, message: String },

    #[error("dimension mismatch: {left_w}x{left_h} vs {right_w}x{right_h}")]
    DimensionMismatch {
        left_w: usize,
        left_h: usize,
        right_w: usize,
        right_h: usize,
    },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("clustering failed: {0}")]
    Clustering(String),

    #[error("mask is empty")]
    EmptyMask,

    #[error("fragment too small: sample area {width}x{height} cannot hold a {patch}x{patch} patch")]
    FragmentTooSmall { width: usize, height: usize, patch: usize },

    #[error("position ({x}, {y}) with patch {patch} is out of bounds for {width}x{height} raster")]
    OutOfBounds {
        x: usize,
        y: usize,
        patch: usize,
        width: usize,
        height: usize,
    },

    #[error("fill failed: {reason} ({remaining} pixels remaining)")]
    Fill { reason: String, remaining: usize },

    #[error("feature error: {0}")]
    Feature(String),

    #[error("dictionary error: {0}")]
    Dictionary(String),

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable machine-readable category, used in CLI error output.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Decode { .. } => "decode",
            Error::Encode { .. } => "encode",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::Invalid(_) => "invalid_input",
            Error::Clustering(_) => "clustering",
            Error::EmptyMask => "empty_mask",
            Error::FragmentTooSmall { .. } => "fragment_too_small",
            Error::OutOfBounds { .. } => "out_of_bounds",
            Error::Fill { .. } => "fill",
            Error::Feature(_) => "feature",
            Error::Dictionary(_) => "dictionary",
            Error::Evaluation(_) => "evaluation",
            Error::Manifest(_) => "manifest",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
