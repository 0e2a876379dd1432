use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse classification used by the command line to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("model build failed at stage {stage}: {reason}")]
    Build { stage: String, reason: String },

    #[error("non-finite gradient in layer {layer}")]
    NonFiniteGradient { layer: usize },

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("bad magic in weight file")]
    BadMagic,

    #[error("weight file truncated: needed {needed} bytes at offset {offset}")]
    Truncated { offset: usize, needed: usize },

    #[error("weight file shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("{path}: line {line}: {reason}")]
    Ingestion {
        path: PathBuf,
        line: u64,
        reason: String,
    },

    #[error("cannot resample from {fs_in} Hz: upsampling is unsupported")]
    UnsupportedUpsample { fs_in: f64 },

    #[error("degenerate signal: {0}")]
    DegenerateSignal(String),

    #[error("degenerate window: constant input")]
    DegenerateWindow,

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("fusion error: sample {index} is not covered by any segment")]
    FusionGap { index: usize },

    #[error("no spectral peak: waveform is constant")]
    NoPeak,

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("empty report: no windows to aggregate")]
    EmptyReport,

    #[error("empty distribution: {0}")]
    EmptyDistribution(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Parameter(_) | Error::Build { .. } => ErrorKind::Config,
            Error::NonFiniteGradient { .. } | Error::NonFiniteLoss { .. } => ErrorKind::Numeric,
            _ => ErrorKind::Data,
        }
    }
}
