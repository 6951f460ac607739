use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("truncated input at frame {frame}: {detail}")]
    TruncatedInput { frame: usize, detail: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("frame {width}x{height} holds no complete {block_size}x{block_size} block")]
    FrameTooSmall {
        width: usize,
        height: usize,
        block_size: usize,
    },
    #[error("unsupported model file version {found} (expected {expected})")]
    UnsupportedVersion { found: u64, expected: u64 },
    #[error("chain has {chain} stage(s) but the model was trained for M={model}")]
    ChainModelMismatch { model: usize, chain: usize },
    #[error("segment has {found} chunk(s) but the model expects T={expected}")]
    FeatureShapeMismatch { expected: usize, found: usize },
    #[error("dataset is empty: {0}")]
    EmptyDataset(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Stream(#[from] std::io::Error),
}

impl Error {
    /// Stable identifier for diagnostics, independent of the message text.
    pub fn name(&self) -> &'static str {
        match self {
            Error::Parse(_) => "ParseError",
            Error::UnsupportedFormat(_) => "UnsupportedFormat",
            Error::TruncatedInput { .. } => "TruncatedInput",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::FrameTooSmall { .. } => "FrameTooSmall",
            Error::UnsupportedVersion { .. } => "UnsupportedVersion",
            Error::ChainModelMismatch { .. } => "ChainModelMismatch",
            Error::FeatureShapeMismatch { .. } => "FeatureShapeMismatch",
            Error::EmptyDataset(_) => "EmptyDataset",
            Error::Io { .. } | Error::Stream(_) => "IoError",
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn parse(msg: impl Into<String>) -> Self {
        Error::Parse(msg.into())
    }
}
