use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::SequenceRegressor;
use crate::dataset::{DatasetSplit, SequenceSample};
use crate::neural::{clip_global_norm, Adam, AdamConfig, NeuralError, Tensor2};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Global gradient-norm ceiling applied before each Adam step.
    pub clip_norm: f64,
    /// A validation RMSE must beat the best by more than this to count.
    pub min_delta: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            patience: 5,
            max_epochs: 100,
            batch_size: 32,
            seed: 0,
            clip_norm: 5.0,
            min_delta: 1e-9,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let msg = if !(self.learning_rate > 0.0) {
            "learning_rate must be > 0"
        } else if self.patience == 0 {
            "patience must be >= 1"
        } else if self.max_epochs == 0 {
            "max_epochs must be >= 1"
        } else if self.batch_size == 0 {
            "batch_size must be >= 1"
        } else if !(self.clip_norm > 0.0) {
            "clip_norm must be > 0"
        } else {
            return Ok(());
        };
        Err(TrainError::InvalidConfig(msg.into()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Patience,
    MaxEpochs,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_rmse: f64,
    pub val_rmse: f64,
}

/// Convergence record of one training run (normalized units).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub epochs: Vec<EpochRecord>,
    /// RMSE of every mini-batch, in order.
    pub iterations: Vec<f64>,
    pub best_epoch: usize,
    pub best_val_rmse: f64,
    pub stop_reason: StopReason,
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training or validation side is empty")]
    EmptyDataset,
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("loss became non-finite in epoch {epoch}")]
    NonFiniteLoss { epoch: usize, trace: Box<TrainTrace> },
    #[error(transparent)]
    Neural(#[from] NeuralError),
}

/// Patience-based stopping on a lower-is-better score.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    pub patience: usize,
    pub min_delta: f64,
    best: f64,
    best_epoch: usize,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize, min_delta: f64) -> Self {
        EarlyStopping {
            patience,
            min_delta,
            best: f64::INFINITY,
            best_epoch: 0,
            stale: 0,
        }
    }

    /// Record a score; returns true if it is a new best.
    pub fn observe(&mut self, epoch: usize, score: f64) -> bool {
        if score < self.best - self.min_delta {
            self.best = score;
            self.best_epoch = epoch;
            self.stale = 0;
            true
        } else {
            self.stale += 1;
            false
        }
    }

    pub fn should_stop(&self) -> bool {
        self.stale >= self.patience
    }

    pub fn best(&self) -> (usize, f64) {
        (self.best_epoch, self.best)
    }
}

/// RMSE of a model over normalized samples.
pub fn normalized_rmse<M: SequenceRegressor>(model: &M, samples: &[SequenceSample]) -> Result<f64, NeuralError> {
    let mut sq = 0.0;
    for s in samples {
        let e = model.forward(&s.inputs)? - s.target;
        sq += e * e;
    }
    Ok((sq / samples.len() as f64).sqrt())
}

/// Mini-batch Adam on half-MSE, validated on the split's test side, with the
/// best-validation parameters restored at the end.
pub fn train<M: SequenceRegressor>(
    model: &mut M,
    split: &DatasetSplit,
    cfg: &TrainConfig,
) -> Result<TrainTrace, TrainError> {
    if split.test.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    fit(model, &split.train, cfg, |m, _| normalized_rmse(m, &split.test))
}

/// Training loop with a caller-supplied validation score (lower is better).
///
/// `validate` is called after every epoch with the current model and the
/// 1-based epoch number.
pub fn fit<M, F>(
    model: &mut M,
    train: &[SequenceSample],
    cfg: &TrainConfig,
    mut validate: F,
) -> Result<TrainTrace, TrainError>
where
    M: SequenceRegressor,
    F: FnMut(&M, usize) -> Result<f64, NeuralError>,
{
    cfg.validate()?;
    if train.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    if !model.is_initialized() {
        model.initialize(cfg.seed);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(
        model,
        AdamConfig {
            learning_rate: cfg.learning_rate,
            ..AdamConfig::default()
        },
    );
    let mut stopper = EarlyStopping::new(cfg.patience, cfg.min_delta);
    let mut best: Vec<Tensor2> = model.snapshot();
    let mut trace = TrainTrace {
        epochs: Vec::new(),
        iterations: Vec::new(),
        best_epoch: 0,
        best_val_rmse: f64::INFINITY,
        stop_reason: StopReason::MaxEpochs,
    };
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_sq = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            model.zero_grad();
            let weight = 1.0 / batch.len() as f64;
            let mut batch_sq = 0.0;
            for &i in batch {
                let s = &train[i];
                let y = model.accumulate(&s.inputs, s.target, weight)?;
                batch_sq += (y - s.target) * (y - s.target);
            }
            if !batch_sq.is_finite() {
                return Err(TrainError::NonFiniteLoss {
                    epoch,
                    trace: Box::new(trace),
                });
            }
            epoch_sq += batch_sq;
            trace.iterations.push((batch_sq * weight).sqrt());
            clip_global_norm(&mut model.params_mut(), cfg.clip_norm);
            adam.step(model)?;
        }
        let val = validate(model, epoch)?;
        if !val.is_finite() {
            return Err(TrainError::NonFiniteLoss {
                epoch,
                trace: Box::new(trace),
            });
        }
        let record = EpochRecord {
            epoch,
            train_rmse: (epoch_sq / train.len() as f64).sqrt(),
            val_rmse: val,
        };
        log::info!(
            "{} epoch {epoch}: train rmse {:.5}, val rmse {:.5}",
            model.kind(),
            record.train_rmse,
            record.val_rmse
        );
        trace.epochs.push(record);
        if stopper.observe(epoch, val) {
            best = model.snapshot();
        }
        if stopper.should_stop() {
            trace.stop_reason = StopReason::Patience;
            break;
        }
    }
    let (best_epoch, best_val) = stopper.best();
    trace.best_epoch = best_epoch;
    trace.best_val_rmse = best_val;
    model.restore(&best)?;
    Ok(trace)
}

/// `epoch,train_rmse,val_rmse` rows.
pub fn write_trace<W: Write>(trace: &TrainTrace, out: W) -> csv::Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(["epoch", "train_rmse", "val_rmse"])?;
    for e in &trace.epochs {
        writer.write_record([e.epoch.to_string(), e.train_rmse.to_string(), e.val_rmse.to_string()])?;
    }
    writer.flush()?;
    Ok(())
}

/// `iteration,rmse` rows, one per mini-batch.
pub fn write_iterations<W: Write>(trace: &TrainTrace, out: W) -> csv::Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(["iteration", "rmse"])?;
    for (i, r) in trace.iterations.iter().enumerate() {
        writer.write_record([(i + 1).to_string(), r.to_string()])?;
    }
    writer.flush()?;
    Ok(())
}
