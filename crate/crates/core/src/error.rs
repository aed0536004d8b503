use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("decode error: {0}")]
    Decode(String),

    #[error("encode error: {0}")]
    Encode(String),

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: String, right: String },

    #[error("image too small: {width}x{height} is smaller than window {window}")]
    ImageTooSmall {
        width: u32,
        height: u32,
        window: usize,
    },

    #[error("insufficient embedding capacity: {0}")]
    Capacity(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("morph manipulation requires a partner image and landmark sets")]
    MissingAux,

    #[error("codec unavailable: {0}")]
    CodecUnavailable(String),

    #[error("degenerate point set: {0}")]
    DegenerateInput(String),

    #[error("landmark mismatch: {0}")]
    LandmarkMismatch(String),

    #[error("degenerate training data: {0}")]
    DegenerateData(String),

    #[error("non-finite feature at index {index}")]
    NonFiniteFeature { index: usize },

    #[error("feature length mismatch: model expects {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("empty test set")]
    EmptyTestSet,

    #[error("empty split: {0}")]
    EmptySplit(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("serialization error: {0}")]
    Serialization(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
