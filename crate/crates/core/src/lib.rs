//! Content-aware prediction of the quality left after a chain of lossy
//! transcodes, without access to the pristine reference.
//!
//! The pipeline reads luma frames ([`video_io`]), summarises each 15-frame
//! chunk with DCT texture, temporal and brightness features ([`features`]),
//! appends the stage bitrates of a transcoding chain ([`transcode`]), and
//! feeds the sequence to a small LSTM regressor ([`lstm`]). [`predict`] ties
//! these together and scores a model against labelled data.

pub mod error;
pub mod features;
pub mod fmt;
pub mod lstm;
pub mod matrix;
pub mod metric;
pub mod predict;
pub mod transcode;
pub mod video_io;

pub use error::{Error, Result};
pub use features::{FeatureExtractor, SegmentFeatures};
pub use lstm::{load_model, save_model, train, LstmModel, TrainConfig, TrainSample};
pub use matrix::Matrix;
pub use metric::Metric;
pub use predict::{evaluate, ingest_dataset, jnd_check, predict_quality, EvalReport, PredictSource, QualityScore};
pub use transcode::{default_hls_ladder, Ladder, ModelInput, TranscodeChain};
pub use video_io::{FramePlane, FrameRate, SegmentSource};
