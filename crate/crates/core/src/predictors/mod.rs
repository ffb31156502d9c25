//! The three acceleration predictors and their training loop.
//!
//! [`LstmNet`] and [`AnnNet`] work in normalized units and are trained with
//! [`train`]; [`MpcController`] is a fixed controller that reads physical
//! state. [`Model`] puts all three behind one `predict` call that takes a
//! normalized window and returns m/s².

mod ann;
mod lstm_net;
mod mlp;
mod mpc;
mod train;

pub use ann::{AnnConfig, AnnNet, ANN_HIDDEN_LAYERS};
pub use lstm_net::{LstmNet, LstmNetConfig};
pub use mlp::ReluStack;
pub use mpc::{mpc_predict, MpcConfig, MpcController, MpcState};
pub use train::{
    fit, normalized_rmse, train, write_iterations, write_trace, EarlyStopping, EpochRecord, StopReason,
    TrainConfig, TrainError, TrainTrace,
};

use std::io::{Read, Write};

use thiserror::Error;

use crate::dataset::{Features, NormalizationStats};
use crate::neural::{read_checkpoint, write_checkpoint, Checkpoint, NeuralError, Parameterized};

#[derive(Debug, Error)]
pub enum PredictError {
    #[error("window has {found} frames, model expects {expected}")]
    WrongWindowLength { expected: usize, found: usize },
    #[error("model parameters have not been initialized or trained")]
    UntrainedModel,
    #[error("MPC horizon must be at least one step")]
    DegenerateHorizon,
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Dataset(#[from] crate::dataset::DatasetError),
}

/// Common surface of the trainable sequence models.
pub trait SequenceRegressor: Parameterized {
    fn kind(&self) -> &'static str;
    fn window(&self) -> usize;
    fn is_initialized(&self) -> bool;
    fn mark_initialized(&mut self);
    /// Seeded random initialization.
    fn initialize(&mut self, seed: u64);
    fn config_json(&self) -> serde_json::Value;

    /// Normalized prediction for a normalized window.
    fn forward(&self, window: &[Features]) -> Result<f64, NeuralError>;

    /// Forward pass plus backprop of `weight * (y - target)`; returns `y`.
    fn accumulate(&mut self, window: &[Features], target: f64, weight: f64) -> Result<f64, NeuralError>;
}

fn load_into<M: SequenceRegressor>(model: &mut M, checkpoint: &Checkpoint) -> Result<(), PredictError> {
    if checkpoint.kind != model.kind() {
        return Err(NeuralError::Checkpoint(format!(
            "expected a `{}` checkpoint, found `{}`",
            model.kind(),
            checkpoint.kind
        ))
        .into());
    }
    let mut params = model.params_mut();
    if params.len() != checkpoint.tensors.len() {
        return Err(NeuralError::Checkpoint(format!(
            "expected {} tensors, found {}",
            params.len(),
            checkpoint.tensors.len()
        ))
        .into());
    }
    for (p, (name, t)) in params.iter_mut().zip(&checkpoint.tensors) {
        if &p.name != name || p.value.shape() != t.shape() {
            return Err(NeuralError::Checkpoint(format!(
                "tensor `{name}` {:?} does not match `{}` {:?}",
                t.shape(),
                p.name,
                p.value.shape()
            ))
            .into());
        }
        p.value = t.clone();
    }
    model.mark_initialized();
    Ok(())
}

pub fn to_checkpoint<M: SequenceRegressor>(model: &M) -> Checkpoint {
    Checkpoint {
        kind: model.kind().to_string(),
        config: model.config_json(),
        tensors: model
            .params()
            .iter()
            .map(|p| (p.name.clone(), p.value.clone()))
            .collect(),
    }
}

/// Any of the three predictors.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Lstm(LstmNet),
    Ann(AnnNet),
    Mpc(MpcController),
}

impl Model {
    pub fn name(&self) -> &'static str {
        match self {
            Model::Lstm(_) => "lstm",
            Model::Ann(_) => "ann",
            Model::Mpc(_) => "mpc",
        }
    }

    /// Next-step SV acceleration (m/s²) for a normalized window.
    pub fn predict(&self, window: &[Features], stats: &NormalizationStats) -> Result<f64, PredictError> {
        stats.check()?;
        match self {
            Model::Lstm(net) => predict_regressor(net, window, stats),
            Model::Ann(net) => predict_regressor(net, window, stats),
            Model::Mpc(mpc) => {
                let last = window.last().ok_or(PredictError::WrongWindowLength {
                    expected: 1,
                    found: 0,
                })?;
                let state = MpcState::from_features(&stats.denormalize_features(last));
                mpc_predict(&state, &mpc.config)
            }
        }
    }

    pub fn save<W: Write>(&self, out: W) -> Result<(), PredictError> {
        let checkpoint = match self {
            Model::Lstm(net) => to_checkpoint(net),
            Model::Ann(net) => to_checkpoint(net),
            Model::Mpc(_) => {
                return Err(PredictError::InvalidConfig("MPC has no parameters to save".into()))
            }
        };
        write_checkpoint(&checkpoint, out)?;
        Ok(())
    }

    /// Rebuild a trained network from a checkpoint, using its echoed config.
    pub fn load<R: Read>(input: R) -> Result<Self, PredictError> {
        let checkpoint = read_checkpoint(input)?;
        let bad_config = |e: serde_json::Error| PredictError::InvalidConfig(e.to_string());
        match checkpoint.kind.as_str() {
            "lstm" => {
                let config = serde_json::from_value(checkpoint.config.clone()).map_err(bad_config)?;
                let mut net = LstmNet::new(config)?;
                load_into(&mut net, &checkpoint)?;
                Ok(Model::Lstm(net))
            }
            "ann" => {
                let config = serde_json::from_value(checkpoint.config.clone()).map_err(bad_config)?;
                let mut net = AnnNet::new(config)?;
                load_into(&mut net, &checkpoint)?;
                Ok(Model::Ann(net))
            }
            other => Err(NeuralError::Checkpoint(format!("unknown model kind `{other}`")).into()),
        }
    }
}

/// Load a checkpoint into an existing network, rejecting any shape mismatch.
pub fn load_checkpoint_into<M: SequenceRegressor, R: Read>(model: &mut M, input: R) -> Result<(), PredictError> {
    let checkpoint = read_checkpoint(input)?;
    load_into(model, &checkpoint)
}

fn predict_regressor<M: SequenceRegressor>(
    model: &M,
    window: &[Features],
    stats: &NormalizationStats,
) -> Result<f64, PredictError> {
    if window.len() != model.window() {
        return Err(PredictError::WrongWindowLength {
            expected: model.window(),
            found: window.len(),
        });
    }
    if !model.is_initialized() {
        return Err(PredictError::UntrainedModel);
    }
    Ok(stats.denormalize_target(model.forward(window)?))
}
