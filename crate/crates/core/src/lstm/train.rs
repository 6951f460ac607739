use log::debug;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::adam::{Adam, AdamConfig};
use super::params::LstmParams;
use super::{normalize, LstmModel, ModelHeader, NormStats, DEFAULT_HIDDEN_SIZE, MODEL_FILE_VERSION};
use crate::error::{Error, Result};
use crate::features::{DEFAULT_BLOCK_SIZE, DEFAULT_CHUNK_FRAMES};
use crate::matrix::Matrix;
use crate::metric::Metric;
use crate::transcode::ModelInput;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub hidden_size: usize,
    pub metric: Metric,
    /// Feature-extraction settings recorded in the model header.
    pub block_size: usize,
    pub chunk_frames: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 32,
            seed: 0,
            hidden_size: DEFAULT_HIDDEN_SIZE,
            metric: Metric::Vmaf,
            block_size: DEFAULT_BLOCK_SIZE,
            chunk_frames: DEFAULT_CHUNK_FRAMES,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return Err(Error::invalid(format!("{name} must lie in (0, 1)")));
            }
        }
        if self.epsilon <= 0.0 || self.batch_size == 0 || self.hidden_size == 0 {
            return Err(Error::invalid("epsilon, batch size and hidden size must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSample {
    pub input: ModelInput,
    pub target: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_mae: f64,
    pub val_mae: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub model: LstmModel,
    pub history: Vec<EpochStats>,
}

impl TrainedModel {
    /// Training log as CSV: `epoch,train_mae,val_mae`.
    pub fn history_csv(&self) -> String {
        let mut out = String::from("epoch,train_mae,val_mae\n");
        for e in &self.history {
            let val = e.val_mae.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!("{},{},{}\n", e.epoch, e.train_mae, val));
        }
        out
    }
}

pub fn train(dataset: &[TrainSample], config: &TrainConfig) -> Result<TrainedModel> {
    train_with_validation(dataset, &[], config)
}

/// Fits normalisation on `dataset`, then runs seeded mini-batch Adam on the
/// MAE. `validation` only feeds the per-epoch log.
pub fn train_with_validation(
    dataset: &[TrainSample],
    validation: &[TrainSample],
    config: &TrainConfig,
) -> Result<TrainedModel> {
    config.validate()?;
    let first = dataset
        .first()
        .ok_or_else(|| Error::EmptyDataset("no training samples".into()))?;
    let (steps, width) = (first.input.steps(), first.input.width());
    for s in dataset.iter().chain(validation) {
        if (s.input.steps(), s.input.width()) != (steps, width) {
            return Err(Error::invalid(format!(
                "sample input is {}x{} but the first sample is {steps}x{width}",
                s.input.steps(),
                s.input.width()
            )));
        }
        if !s.target.is_finite() {
            return Err(Error::invalid("training target is not finite"));
        }
    }

    let norm = NormStats::fit(dataset.iter().map(|s| &s.input))?;
    let prepare = |set: &[TrainSample]| -> Result<Vec<(Matrix, f64)>> {
        set.iter()
            .map(|s| Ok((normalize(&s.input, &norm)?, s.target)))
            .collect()
    };
    let train_set = prepare(dataset)?;
    let val_set = prepare(validation)?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = LstmParams::init(config.hidden_size, width, &mut rng);
    // Head bias starts at the mean training target.
    params.set_head_bias(dataset.iter().map(|s| s.target).sum::<f64>() / dataset.len() as f64);

    let header = ModelHeader {
        metric: config.metric,
        stages: first.input.stages(),
        steps,
        chunk_frames: config.chunk_frames,
        block_size: config.block_size,
        version: MODEL_FILE_VERSION,
    };
    let mut model = LstmModel::new(header, norm, params)?;
    let mut adam = Adam::new(
        model.params.len(),
        AdamConfig {
            learning_rate: config.learning_rate,
            beta1: config.beta1,
            beta2: config.beta2,
            epsilon: config.epsilon,
        },
    );
    let mut grad = LstmParams::zeros(config.hidden_size, width);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for batch_idx in order.chunks(config.batch_size) {
            let batch: Vec<(&Matrix, f64)> = batch_idx
                .iter()
                .map(|&i| (&train_set[i].0, train_set[i].1))
                .collect();
            model.accumulate_batch(&batch, &mut grad)?;
            adam.step(model.params.as_mut_slice(), grad.as_slice());
        }
        let stats = EpochStats {
            epoch,
            train_mae: set_mae(&model, &train_set)?,
            val_mae: if val_set.is_empty() {
                None
            } else {
                Some(set_mae(&model, &val_set)?)
            },
        };
        debug!("epoch {epoch}: train MAE {:.4} val MAE {:?}", stats.train_mae, stats.val_mae);
        history.push(stats);
    }
    Ok(TrainedModel { model, history })
}

fn set_mae(model: &LstmModel, set: &[(Matrix, f64)]) -> Result<f64> {
    let mut total = 0.0;
    for (x, t) in set {
        total += (model.forward(x)? - t).abs();
    }
    Ok(total / set.len() as f64)
}
