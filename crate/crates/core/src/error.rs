use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed NIfTI header: {0}")]
    MalformedHeader(String),

    #[error("unsupported NIfTI datatype code {0}")]
    UnsupportedDatatype(i16),

    #[error("4D volume with {0} frames; only single-frame volumes are supported")]
    MultiFrame(usize),

    #[error("value {value} at voxel {index} is outside [-0.01, 1.01]; input does not look like a probability map")]
    OutOfRange { index: usize, value: f64 },

    #[error("non-finite value at voxel {0}")]
    NonFinite(usize),

    #[error("data length mismatch: dims require {expected} values, found {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("unknown dtype {0:?}")]
    UnknownDtype(String),

    #[error("unknown byte order {0:?}")]
    UnknownByteOrder(String),

    #[error("invalid json in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("invalid volume geometry: {0}")]
    Geometry(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("could not place lesion {placed} of {requested} after {attempts} attempts")]
    Placement {
        placed: usize,
        requested: usize,
        attempts: usize,
    },

    #[error("series has {0} points; a linear fit needs at least 2")]
    TooFewPoints(usize),

    #[error("subject {subject:?} is missing a ground-truth count at timepoint {t_index}")]
    MissingGroundTruth { subject: String, t_index: u32 },

    #[error("invalid manifest: {0}")]
    Manifest(String),

    #[error("{subjects} subjects cannot be split into {folds} folds")]
    TooFewSubjects { subjects: usize, folds: usize },

    #[error("paired samples differ in length ({0} vs {1})")]
    SampleMismatch(usize, usize),

    #[error("paired t-test needs at least 2 cases, got {0}")]
    TooFewCases(usize),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
