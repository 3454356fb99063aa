use std::path::PathBuf;

use crate::trainer::TrainHistory;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} values, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("non-finite value at flat index {index}")]
    NonFiniteValue { index: usize },

    #[error("grid spacing must be positive and finite, got {0}")]
    InvalidSpacing(f64),

    #[error("grid must be at least 2x2, got {height}x{width}")]
    DegenerateGrid { height: usize, width: usize },

    #[error("invalid channel names: {0}")]
    InvalidChannelNames(String),

    #[error("grid {height}x{width} is not divisible by factor {factor}")]
    NotDivisible { height: usize, width: usize, factor: usize },

    #[error("channel {index} out of range ({count} channels)")]
    ChannelOutOfRange { index: usize, count: usize },

    #[error("unknown channel `{0}`")]
    UnknownChannel(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("radial binning needs at least 2 bins, got {0}")]
    TooFewBins(usize),

    #[error("fair CRPS needs at least two ensemble members")]
    FairEstimatorNeedsTwoMembers,

    #[error("ensemble has no members")]
    EmptyEnsemble,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("kernel size must be odd, got {0}")]
    EvenKernel(usize),

    #[error("channel mismatch: model expects {expected} input channels, got {actual}")]
    ChannelMismatch { expected: usize, actual: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("training diverged at epoch {epoch}: loss became non-finite")]
    DivergenceDetected {
        epoch: usize,
        history: Box<TrainHistory>,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}
