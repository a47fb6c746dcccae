use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to decode or encode image {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("unsupported image format in {path}: {detail}")]
    UnsupportedImage { path: PathBuf, detail: String },

    #[error("CSV error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("malformed record at {path}:{line}: {detail}")]
    MalformedRecord {
        path: PathBuf,
        line: u64,
        detail: String,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("image of {width}x{height} is too small, need at least {min}x{min}")]
    TooSmall {
        width: usize,
        height: usize,
        min: usize,
    },

    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("frame index {got} out of order, expected {expected}")]
    IndexOrder { expected: u64, got: u64 },

    #[error("no files matching {pattern:?} in {dir}")]
    EmptySequence { dir: PathBuf, pattern: String },

    #[error("degenerate evaluation geometry: {0}")]
    DegenerateGeometry(String),

    #[error("at frame {index}: {source}")]
    AtFrame {
        index: u64,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn at_frame(self, index: u64) -> Self {
        match self {
            e @ Error::AtFrame { .. } => e,
            e => Error::AtFrame {
                index,
                source: Box::new(e),
            },
        }
    }
}
