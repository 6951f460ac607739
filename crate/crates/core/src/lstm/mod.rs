//! Single-layer LSTM regressor with a scalar head, trained with Adam on the
//! mean absolute error.

mod adam;
mod cell;
mod file;
mod params;
mod train;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::metric::Metric;
use crate::transcode::{ModelInput, CONTENT_COLUMNS};

pub use adam::{Adam, AdamConfig};
pub use file::{load_model, model_from_json, model_to_json, save_model, MODEL_FILE_VERSION};
pub use params::{Gate, LstmParams};
pub use train::{train, train_with_validation, EpochStats, TrainConfig, TrainSample, TrainedModel};

pub const DEFAULT_HIDDEN_SIZE: usize = 50;

/// Training regime a model is tied to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelHeader {
    pub metric: Metric,
    /// Stage count `M`.
    #[serde(rename = "M")]
    pub stages: usize,
    /// Chunk count `T`.
    #[serde(rename = "T")]
    pub steps: usize,
    #[serde(rename = "f_c")]
    pub chunk_frames: usize,
    #[serde(rename = "w")]
    pub block_size: usize,
    pub version: u64,
}

impl ModelHeader {
    pub fn input_size(&self) -> usize {
        self.stages + CONTENT_COLUMNS
    }
}

/// Per-column normalisation. Bitrate columns are mapped to `log10(kbps)`
/// before the z-score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

#[inline]
fn pre_transform(col: usize, v: f64) -> f64 {
    if col >= CONTENT_COLUMNS {
        (v * 1000.0).log10()
    } else {
        v
    }
}

#[inline]
fn post_transform(col: usize, v: f64) -> f64 {
    if col >= CONTENT_COLUMNS {
        10f64.powf(v) / 1000.0
    } else {
        v
    }
}

impl NormStats {
    /// Statistics over every row of every input. Zero-variance columns get
    /// `std = 1`.
    pub fn fit<'a>(inputs: impl IntoIterator<Item = &'a ModelInput>) -> Result<Self> {
        let mut width = None;
        let mut sum = Vec::new();
        let mut rows = Vec::new();
        for input in inputs {
            let m = input.matrix();
            match width {
                None => {
                    width = Some(m.cols());
                    sum = vec![0.0; m.cols()];
                }
                Some(w) if w != m.cols() => {
                    return Err(Error::invalid(format!(
                        "inputs disagree on width: {w} vs {}",
                        m.cols()
                    )))
                }
                _ => {}
            }
            for row in m.iter_rows() {
                let t: Vec<f64> = row.iter().enumerate().map(|(c, &v)| pre_transform(c, v)).collect();
                for (s, v) in sum.iter_mut().zip(&t) {
                    *s += v;
                }
                rows.push(t);
            }
        }
        if rows.is_empty() {
            return Err(Error::EmptyDataset("no rows to fit normalisation".into()));
        }
        let n = rows.len() as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let mut var = vec![0.0; mean.len()];
        for row in &rows {
            for ((acc, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *acc += (v - m) * (v - m);
            }
        }
        let std = var
            .iter()
            .zip(&mean)
            .map(|(v, m)| {
                let s = (v / n).sqrt();
                if s > 1e-12 * m.abs().max(1.0) {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Ok(NormStats { mean, std })
    }

    pub fn identity(width: usize) -> Self {
        NormStats {
            mean: vec![0.0; width],
            std: vec![1.0; width],
        }
    }

    pub fn width(&self) -> usize {
        self.mean.len()
    }

    fn validate(&self) -> Result<()> {
        if self.mean.len() != self.std.len() {
            return Err(Error::invalid("normalisation mean/std lengths differ"));
        }
        if self.std.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::invalid("normalisation std must be positive"));
        }
        Ok(())
    }
}

/// Log-transforms bitrate columns, then z-scores every column.
pub fn normalize(input: &ModelInput, stats: &NormStats) -> Result<Matrix> {
    let m = input.matrix();
    if m.cols() != stats.width() {
        return Err(Error::invalid(format!(
            "input has {} columns but normalisation covers {}",
            m.cols(),
            stats.width()
        )));
    }
    Ok(Matrix::from_fn(m.rows(), m.cols(), |r, c| {
        (pre_transform(c, m.get(r, c)) - stats.mean[c]) / stats.std[c]
    }))
}

/// Inverse of [`normalize`].
pub fn denormalize(normalized: &Matrix, stats: &NormStats) -> Result<ModelInput> {
    if normalized.cols() != stats.width() {
        return Err(Error::invalid(format!(
            "matrix has {} columns but normalisation covers {}",
            normalized.cols(),
            stats.width()
        )));
    }
    ModelInput::from_matrix(Matrix::from_fn(normalized.rows(), normalized.cols(), |r, c| {
        post_transform(c, normalized.get(r, c) * stats.std[c] + stats.mean[c])
    }))
}

/// Mean absolute error.
pub fn loss_mae(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    if predictions.is_empty() || predictions.len() != targets.len() {
        return Err(Error::invalid(format!(
            "MAE needs equal non-empty sequences, got {} and {}",
            predictions.len(),
            targets.len()
        )));
    }
    Ok(predictions
        .iter()
        .zip(targets)
        .map(|(p, t)| (p - t).abs())
        .sum::<f64>()
        / predictions.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmModel {
    pub header: ModelHeader,
    pub norm: NormStats,
    pub params: LstmParams,
}

impl LstmModel {
    pub fn new(header: ModelHeader, norm: NormStats, params: LstmParams) -> Result<Self> {
        let model = LstmModel {
            header,
            norm,
            params,
        };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        let input = self.header.input_size();
        if self.params.input() != input {
            return Err(Error::invalid(format!(
                "header implies input size {input} but weights take {}",
                self.params.input()
            )));
        }
        if self.norm.width() != input {
            return Err(Error::invalid(format!(
                "header implies input size {input} but normalisation covers {}",
                self.norm.width()
            )));
        }
        if self.header.steps == 0 || self.header.stages == 0 || self.params.hidden() == 0 {
            return Err(Error::invalid("model dimensions must be positive"));
        }
        self.norm.validate()
    }

    pub fn hidden_size(&self) -> usize {
        self.params.hidden()
    }

    pub fn input_size(&self) -> usize {
        self.params.input()
    }

    fn check_shape(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.input_size() || x.rows() != self.header.steps {
            return Err(Error::invalid(format!(
                "model expects {}x{} input, got {}x{}",
                self.header.steps,
                self.input_size(),
                x.rows(),
                x.cols()
            )));
        }
        Ok(())
    }

    /// Head output before clamping, on an already normalised input.
    pub fn forward_raw(&self, normalized: &Matrix) -> Result<f64> {
        self.check_shape(normalized)?;
        Ok(cell::run(&self.params, normalized).output)
    }

    /// Prediction on an already normalised input, clamped to the metric range.
    pub fn forward(&self, normalized: &Matrix) -> Result<f64> {
        Ok(self.header.metric.clamp(self.forward_raw(normalized)?))
    }

    /// Normalises `input` with the stored statistics, then runs [`forward`](Self::forward).
    pub fn predict(&self, input: &ModelInput) -> Result<f64> {
        self.forward(&normalize(input, &self.norm)?)
    }

    /// Gradient of `|raw_output - target|` for one normalised sample. The
    /// subgradient at zero error is taken as zero.
    pub fn backward(&self, normalized: &Matrix, target: f64) -> Result<LstmParams> {
        self.check_shape(normalized)?;
        let mut grad = LstmParams::zeros(self.hidden_size(), self.input_size());
        let trace = cell::run(&self.params, normalized);
        cell::accumulate(&self.params, normalized, &trace, mae_slope(trace.output, target), &mut grad);
        Ok(grad)
    }

    /// Gradient of the batch-mean absolute error.
    pub fn batch_gradient(&self, batch: &[(&Matrix, f64)]) -> Result<LstmParams> {
        let mut grad = LstmParams::zeros(self.hidden_size(), self.input_size());
        self.accumulate_batch(batch, &mut grad)?;
        Ok(grad)
    }

    /// Overwrites `grad` with the batch-mean gradient; returns the batch MAE
    /// of the raw outputs.
    pub(crate) fn accumulate_batch(&self, batch: &[(&Matrix, f64)], grad: &mut LstmParams) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::invalid("empty batch"));
        }
        grad.fill_zero();
        let scale = 1.0 / batch.len() as f64;
        let mut loss = 0.0;
        for (x, target) in batch {
            self.check_shape(x)?;
            let trace = cell::run(&self.params, x);
            loss += (trace.output - target).abs();
            cell::accumulate(&self.params, x, &trace, scale * mae_slope(trace.output, *target), grad);
        }
        Ok(loss * scale)
    }
}

#[inline]
fn mae_slope(output: f64, target: f64) -> f64 {
    let d = output - target;
    if d > 0.0 {
        1.0
    } else if d < 0.0 {
        -1.0
    } else {
        0.0
    }
}
