//! End-to-end quality prediction, dataset ingestion, and evaluation.

mod dataset;
mod report;

use crate::error::{Error, Result};
use crate::features::{FeatureExtractor, SegmentFeatures};
use crate::lstm::LstmModel;
use crate::metric::Metric;
use crate::transcode::{assemble_model_input, TranscodeChain};
use crate::video_io::SegmentSource;

pub use dataset::{ingest_dataset, source_key, EvalRecord, Ingested, Side, SkippedRow, Split};
pub use report::{evaluate, mean_absolute_error, r_squared, EvalOptions, EvalReport, EvalRow, RecordPrediction};

/// One just-noticeable difference on the VMAF scale.
pub const DEFAULT_VMAF_JND: f64 = 6.0;

#[derive(Debug, Clone, PartialEq)]
pub struct QualityScore {
    pub metric: Metric,
    pub value: f64,
    pub segment_id: String,
    /// Stage bitrates in Mbps, `;`-separated.
    pub chain: String,
}

impl QualityScore {
    pub fn within_jnd(&self, ground_truth: f64, jnd: f64) -> bool {
        within_jnd(self.value, ground_truth, jnd)
    }
}

/// What to predict from: decoded frames or precomputed features.
#[derive(Debug, Clone, Copy)]
pub enum PredictSource<'a> {
    Video {
        segment_id: &'a str,
        segment: &'a SegmentSource,
    },
    Features(&'a SegmentFeatures),
}

/// Default JND threshold for a metric; only VMAF has one.
pub fn default_jnd(metric: Metric) -> Option<f64> {
    match metric {
        Metric::Vmaf => Some(DEFAULT_VMAF_JND),
        Metric::Psnr | Metric::Ssim => None,
    }
}

/// `|predicted - ground_truth| < jnd`, strictly.
pub fn within_jnd(predicted: f64, ground_truth: f64, jnd: f64) -> bool {
    (predicted - ground_truth).abs() < jnd
}

pub fn jnd_check(predicted: &QualityScore, ground_truth: f64, jnd: f64) -> bool {
    predicted.within_jnd(ground_truth, jnd)
}

fn check_chain(model: &LstmModel, chain: &TranscodeChain) -> Result<()> {
    if chain.len() != model.header.stages {
        return Err(Error::ChainModelMismatch {
            model: model.header.stages,
            chain: chain.len(),
        });
    }
    Ok(())
}

/// Features → model input → normalisation → LSTM, returning the clamped
/// score.
pub fn predict_quality(
    source: PredictSource<'_>,
    chain: &TranscodeChain,
    model: &LstmModel,
) -> Result<QualityScore> {
    check_chain(model, chain)?;
    let extracted;
    let features = match source {
        PredictSource::Features(f) => f,
        PredictSource::Video { segment_id, segment } => {
            let extractor = FeatureExtractor::new(model.header.block_size, model.header.chunk_frames)?;
            extracted = extractor.extract(segment_id, segment)?;
            &extracted
        }
    };
    predict_features(features, chain, model)
}

pub(crate) fn predict_features(
    features: &SegmentFeatures,
    chain: &TranscodeChain,
    model: &LstmModel,
) -> Result<QualityScore> {
    check_chain(model, chain)?;
    if features.chunk_count() != model.header.steps {
        return Err(Error::FeatureShapeMismatch {
            expected: model.header.steps,
            found: features.chunk_count(),
        });
    }
    let input = assemble_model_input(features, chain)?;
    Ok(QualityScore {
        metric: model.header.metric,
        value: model.predict(&input)?,
        segment_id: features.segment_id.clone(),
        chain: chain.to_string(),
    })
}
