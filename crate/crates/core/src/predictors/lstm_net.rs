use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mlp::{ReluStack, StackCache};
use super::{PredictError, SequenceRegressor};
use crate::dataset::{Features, DEFAULT_WINDOW, FEATURE_COUNT};
use crate::neural::{
    Differentiable, FcLayer, LstmLayer, LstmStep, NeuralError, Param, Parameterized,
};

/// Sequence-to-one recurrent regressor:
/// input → (FC → ReLU)* → LSTM → (FC → ReLU)* → FC(1) → half-MSE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LstmNetConfig {
    pub input_dim: usize,
    pub window: usize,
    /// Widths of the FC + ReLU layers applied per time step before the LSTM.
    pub pre_widths: Vec<usize>,
    pub hidden: usize,
    /// Widths of the FC + ReLU layers applied to the final hidden state.
    pub post_widths: Vec<usize>,
}

impl Default for LstmNetConfig {
    fn default() -> Self {
        LstmNetConfig {
            input_dim: FEATURE_COUNT,
            window: DEFAULT_WINDOW,
            pre_widths: vec![200],
            hidden: 200,
            post_widths: vec![200],
        }
    }
}

impl LstmNetConfig {
    /// Same layer order with every width set to `width`.
    pub fn uniform(width: usize, window: usize) -> Self {
        LstmNetConfig {
            window,
            pre_widths: vec![width],
            hidden: width,
            post_widths: vec![width],
            ..LstmNetConfig::default()
        }
    }

    /// Layer kinds in order, counting the input and regression layers.
    pub fn layer_kinds(&self) -> Vec<&'static str> {
        let mut kinds = vec!["sequence_input"];
        kinds.extend(self.pre_widths.iter().flat_map(|_| ["fully_connected", "relu"]));
        kinds.push("lstm");
        kinds.extend(self.post_widths.iter().flat_map(|_| ["fully_connected", "relu"]));
        kinds.push("fully_connected");
        kinds.push("regression");
        kinds
    }

    pub fn validate(&self) -> Result<(), PredictError> {
        if self.input_dim == 0 || self.window == 0 || self.hidden == 0 {
            return Err(PredictError::InvalidConfig(
                "input_dim, window and hidden must be positive".into(),
            ));
        }
        if self.pre_widths.iter().chain(&self.post_widths).any(|&w| w == 0) {
            return Err(PredictError::InvalidConfig("layer widths must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmNet {
    pub config: LstmNetConfig,
    pub pre: ReluStack,
    pub lstm: LstmLayer,
    pub post: ReluStack,
    pub head: FcLayer,
    initialized: bool,
}

struct Pass {
    pre: Vec<StackCache>,
    steps: Vec<LstmStep>,
    post: StackCache,
    post_out: Vec<f64>,
    y: f64,
}

impl LstmNet {
    /// All-zero parameters, marked uninitialized.
    pub fn new(config: LstmNetConfig) -> Result<Self, PredictError> {
        config.validate()?;
        let lstm_in = config.pre_widths.last().copied().unwrap_or(config.input_dim);
        let head_in = config.post_widths.last().copied().unwrap_or(config.hidden);
        Ok(LstmNet {
            pre: ReluStack::zeros("pre", config.input_dim, &config.pre_widths),
            lstm: LstmLayer::zeros("lstm", lstm_in, config.hidden),
            post: ReluStack::zeros("post", config.hidden, &config.post_widths),
            head: FcLayer::zeros("head", head_in, 1),
            config,
            initialized: false,
        })
    }

    /// All-zero parameters, usable for prediction.
    pub fn zeroed(config: LstmNetConfig) -> Result<Self, PredictError> {
        let mut net = LstmNet::new(config)?;
        net.initialized = true;
        Ok(net)
    }

    pub fn seeded(config: LstmNetConfig, seed: u64) -> Result<Self, PredictError> {
        let mut net = LstmNet::new(config)?;
        net.initialize(seed);
        Ok(net)
    }

    fn pass(&self, window: &[Features]) -> Result<Pass, NeuralError> {
        let mut pre = Vec::with_capacity(window.len());
        let mut xs = Vec::with_capacity(window.len());
        for frame in window {
            let (a, cache) = self.pre.forward_cached(frame)?;
            xs.push(a);
            pre.push(cache);
        }
        let hidden = self.config.hidden;
        let zeros = vec![0.0; hidden];
        let steps = self.lstm.forward_sequence(&xs, &zeros, &zeros)?;
        let last = &steps[steps.len() - 1].h;
        let (post_out, post) = self.post.forward_cached(last)?;
        let y = self.head.forward(&post_out)?[0];
        Ok(Pass {
            pre,
            steps,
            post,
            post_out,
            y,
        })
    }
}

impl Parameterized for LstmNet {
    fn params(&self) -> Vec<&Param> {
        let mut p = self.pre.params();
        p.extend(self.lstm.params());
        p.extend(self.post.params());
        p.extend(self.head.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p = self.pre.params_mut();
        p.extend(self.lstm.params_mut());
        p.extend(self.post.params_mut());
        p.extend(self.head.params_mut());
        p
    }
}

impl SequenceRegressor for LstmNet {
    fn kind(&self) -> &'static str {
        "lstm"
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
        let c = &self.config;
        let lstm_in = c.pre_widths.last().copied().unwrap_or(c.input_dim);
        let head_in = c.post_widths.last().copied().unwrap_or(c.hidden);
        self.pre = ReluStack::glorot("pre", c.input_dim, &c.pre_widths, &mut rng);
        self.lstm = LstmLayer::glorot("lstm", lstm_in, c.hidden, &mut rng);
        self.post = ReluStack::glorot("post", c.hidden, &c.post_widths, &mut rng);
        self.head = FcLayer::glorot("head", head_in, 1, &mut rng);
        self.initialized = true;
    }

    fn config_json(&self) -> serde_json::Value {
        serde_json::to_value(&self.config).expect("config serializes")
    }

    fn forward(&self, window: &[Features]) -> Result<f64, NeuralError> {
        Ok(self.pass(window)?.y)
    }

    fn accumulate(&mut self, window: &[Features], target: f64, weight: f64) -> Result<f64, NeuralError> {
        let pass = self.pass(window)?;
        let dy = weight * (pass.y - target);
        let d_post = self.head.backward(&pass.post_out, &[dy])?;
        let d_h = self.post.backward(&pass.post, d_post)?;
        let mut dh = vec![vec![0.0; self.config.hidden]; pass.steps.len()];
        let last = dh.len() - 1;
        dh[last] = d_h;
        let (dxs, _, _) = self.lstm.backward_sequence(&pass.steps, &dh)?;
        for (cache, dx) in pass.pre.iter().zip(dxs) {
            self.pre.backward(cache, dx)?;
        }
        Ok(pass.y)
    }
}

impl Differentiable for LstmNet {
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
