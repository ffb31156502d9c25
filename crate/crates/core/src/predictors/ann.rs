use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mlp::ReluStack;
use super::{PredictError, SequenceRegressor};
use crate::dataset::{Features, DEFAULT_WINDOW, FEATURE_COUNT};
use crate::neural::{Differentiable, FcLayer, NeuralError, Param, Parameterized};

pub const ANN_HIDDEN_LAYERS: usize = 5;

/// Feed-forward baseline on the flattened window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnnConfig {
    pub input_dim: usize,
    pub window: usize,
    pub hidden: Vec<usize>,
}

impl Default for AnnConfig {
    fn default() -> Self {
        AnnConfig {
            input_dim: FEATURE_COUNT,
            window: DEFAULT_WINDOW,
            hidden: vec![200; ANN_HIDDEN_LAYERS],
        }
    }
}

impl AnnConfig {
    pub fn uniform(width: usize, window: usize) -> Self {
        AnnConfig {
            window,
            hidden: vec![width; ANN_HIDDEN_LAYERS],
            ..AnnConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), PredictError> {
        if self.hidden.len() != ANN_HIDDEN_LAYERS {
            return Err(PredictError::InvalidConfig(format!(
                "ANN needs {ANN_HIDDEN_LAYERS} hidden layers, got {}",
                self.hidden.len()
            )));
        }
        if self.input_dim == 0 || self.window == 0 || self.hidden.contains(&0) {
            return Err(PredictError::InvalidConfig("ANN sizes must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnNet {
    pub config: AnnConfig,
    pub hidden: ReluStack,
    pub head: FcLayer,
    initialized: bool,
}

impl AnnNet {
    pub fn new(config: AnnConfig) -> Result<Self, PredictError> {
        config.validate()?;
        let flat = config.window * config.input_dim;
        Ok(AnnNet {
            hidden: ReluStack::zeros("hidden", flat, &config.hidden),
            head: FcLayer::zeros("head", config.hidden[ANN_HIDDEN_LAYERS - 1], 1),
            config,
            initialized: false,
        })
    }

    pub fn seeded(config: AnnConfig, seed: u64) -> Result<Self, PredictError> {
        let mut net = AnnNet::new(config)?;
        net.initialize(seed);
        Ok(net)
    }

    fn flatten(window: &[Features]) -> Vec<f64> {
        window.iter().flatten().copied().collect()
    }
}

impl Parameterized for AnnNet {
    fn params(&self) -> Vec<&Param> {
        let mut p = self.hidden.params();
        p.extend(self.head.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p = self.hidden.params_mut();
        p.extend(self.head.params_mut());
        p
    }
}

impl SequenceRegressor for AnnNet {
    fn kind(&self) -> &'static str {
        "ann"
    }

    fn window(&self) -> usize {
        self.config.window
    }

    fn is_initialized(&self) -> bool {
        self.initialized
    }

    fn mark_initialized(&mut self) {
        self.initialized = true;
    }

    fn initialize(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let flat = self.config.window * self.config.input_dim;
        self.hidden = ReluStack::glorot("hidden", flat, &self.config.hidden, &mut rng);
        self.head = FcLayer::glorot("head", self.config.hidden[ANN_HIDDEN_LAYERS - 1], 1, &mut rng);
        self.initialized = true;
    }

    fn config_json(&self) -> serde_json::Value {
        serde_json::to_value(&self.config).expect("config serializes")
    }

    fn forward(&self, window: &[Features]) -> Result<f64, NeuralError> {
        let a = self.hidden.forward(&AnnNet::flatten(window))?;
        Ok(self.head.forward(&a)?[0])
    }

    fn accumulate(&mut self, window: &[Features], target: f64, weight: f64) -> Result<f64, NeuralError> {
        let (a, cache) = self.hidden.forward_cached(&AnnNet::flatten(window))?;
        let y = self.head.forward(&a)?[0];
        let da = self.head.backward(&a, &[weight * (y - target)])?;
        self.hidden.backward(&cache, da)?;
        Ok(y)
    }
}

impl Differentiable for AnnNet {
    type Input = [Features];
    type Target = f64;

    fn loss(&self, input: &[Features], target: &f64) -> Result<f64, NeuralError> {
        let y = self.forward(input)?;
        crate::neural::half_mse_loss(&[y], &[*target])
    }

    fn backprop(&mut self, input: &[Features], target: &f64) -> Result<f64, NeuralError> {
        let y = self.accumulate(input, *target, 1.0)?;
        crate::neural::half_mse_loss(&[y], &[*target])
    }
}
