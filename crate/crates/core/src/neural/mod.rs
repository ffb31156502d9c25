//! Hand-written differentiable building blocks in f64.
//!
//! Every layer keeps its parameters in [`Param`]s, which pair a value tensor
//! with a gradient tensor of the same shape. Backward passes accumulate into
//! the gradients; callers zero them between batches.

mod adam;
mod checkpoint;
mod gradcheck;
mod layers;
mod loss;
mod lstm;
mod tensor;

pub use adam::{adam_step, clip_global_norm, Adam, AdamConfig, AdamState};
pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, CHECKPOINT_VERSION};
pub use gradcheck::{gradient_check, GradCheck, ABSOLUTE_FLOOR};
pub use layers::{relu_backward, relu_forward, FcLayer};
pub use loss::{half_mse_grad, half_mse_loss};
pub use lstm::{LstmLayer, LstmStep, GATE_NAMES};
pub use tensor::Tensor2;

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("{op}: shape mismatch (expected {expected}, found {found})")]
    ShapeMismatch {
        op: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("{0} produced a non-finite value")]
    NonFinite(&'static str),
    #[error("loss is not finite")]
    NonFiniteLoss,
    #[error("empty sequence")]
    EmptySequence,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = NeuralError> = std::result::Result<T, E>;

/// A trainable tensor with its accumulated gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Tensor2,
    pub grad: Tensor2,
}

impl Param {
    pub fn zeros(name: impl Into<String>, rows: usize, cols: usize) -> Self {
        Param {
            name: name.into(),
            value: Tensor2::zeros(rows, cols),
            grad: Tensor2::zeros(rows, cols),
        }
    }

    /// Uniform in ±√(6 / (fan_in + fan_out)).
    pub fn glorot<R: Rng>(name: impl Into<String>, rows: usize, cols: usize, rng: &mut R) -> Self {
        let mut p = Param::zeros(name, rows, cols);
        let limit = (6.0 / (rows + cols) as f64).sqrt();
        for v in p.value.data_mut() {
            *v = rng.random_range(-limit..limit);
        }
        p
    }
}

/// Anything that owns a list of [`Param`]s in a fixed order.
pub trait Parameterized {
    fn params(&self) -> Vec<&Param>;
    fn params_mut(&mut self) -> Vec<&mut Param>;

    fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.grad.fill(0.0);
        }
    }

    fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.value.len()).sum()
    }

    /// Copy of every parameter value, in order.
    fn snapshot(&self) -> Vec<Tensor2> {
        self.params().iter().map(|p| p.value.clone()).collect()
    }

    fn restore(&mut self, values: &[Tensor2]) -> Result<()> {
        let mut params = self.params_mut();
        if params.len() != values.len() {
            return Err(NeuralError::ShapeMismatch {
                op: "restore",
                expected: params.len(),
                found: values.len(),
            });
        }
        for (p, v) in params.iter_mut().zip(values) {
            if p.value.shape() != v.shape() {
                return Err(NeuralError::ShapeMismatch {
                    op: "restore",
                    expected: p.value.len(),
                    found: v.len(),
                });
            }
            p.value = v.clone();
        }
        Ok(())
    }
}

/// A model with a scalar loss that can be differentiated w.r.t. its params.
pub trait Differentiable: Parameterized {
    type Input: ?Sized;
    type Target: ?Sized;

    fn loss(&self, input: &Self::Input, target: &Self::Target) -> Result<f64>;

    /// Compute the loss and accumulate its gradient into the params.
    fn backprop(&mut self, input: &Self::Input, target: &Self::Target) -> Result<f64>;
}

pub(crate) fn ensure_finite(values: &[f64], op: &'static str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(NeuralError::NonFinite(op))
    }
}

pub(crate) fn check_len(op: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(NeuralError::ShapeMismatch {
            op,
            expected,
            found,
        })
    }
}
