use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::dataset::{DistanceMode, DEFAULT_SPLIT_RATIO, DEFAULT_WINDOW};
use crate::detect::DetectorConfig;
use crate::predictors::{MpcConfig, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Directory of `<id>_tracks.csv` files; defaults to `<out>/recordings`.
    pub input: Option<PathBuf>,
    pub out: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            input: None,
            out: PathBuf::from("run"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthKind {
    /// Independent aggressive cut-ins with an immediate SV response.
    Planted,
    /// SV reacts to the state `lag` frames back and the PV speed swings.
    Sequence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthParams {
    pub kind: SynthKind,
    pub recordings: usize,
    pub events_per_recording: usize,
    pub lag: usize,
    /// Emit every other recording in the -x direction.
    pub mixed_directions: bool,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            kind: SynthKind::Planted,
            recordings: 4,
            events_per_recording: 4,
            lag: 10,
            mixed_directions: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetParams {
    pub window_length: usize,
    pub ratio: f64,
    pub distance_mode: DistanceMode,
}

impl Default for DatasetParams {
    fn default() -> Self {
        DatasetParams {
            window_length: DEFAULT_WINDOW,
            ratio: DEFAULT_SPLIT_RATIO,
            distance_mode: DistanceMode::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelParams {
    /// Trainable models to fit and evaluate; MPC is always evaluated.
    pub models: Vec<String>,
    /// Width of every FC/LSTM/hidden layer.
    pub width: usize,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            models: vec!["lstm".into(), "ann".into()],
            width: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimParams {
    /// `mpc`, `lstm` or `ann`.
    pub controller: String,
    /// Index into `events.csv`.
    pub event: usize,
    pub a_min: f64,
    pub a_max: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            controller: "mpc".into(),
            event: 0,
            a_min: -4.0,
            a_max: 2.0,
        }
    }
}

/// Everything a run needs. Loaded from TOML with flat sections; every field
/// has a default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Drives synthesis, the split shuffle and training.
    pub seed: u64,
    pub paths: Paths,
    pub synth: SynthParams,
    pub detect: DetectorConfig,
    pub dataset: DatasetParams,
    pub model: ModelParams,
    pub train: TrainConfig,
    pub mpc: MpcConfig,
    pub sim: SimParams,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub input: Option<PathBuf>,
    pub window_length: Option<usize>,
    pub ratio: Option<f64>,
    pub lr: Option<f64>,
    pub patience: Option<usize>,
    pub max_epochs: Option<usize>,
    pub headway: Option<f64>,
    pub min_decel: Option<f64>,
    pub models: Option<Vec<String>>,
}

const MODEL_NAMES: [&str; 3] = ["lstm", "ann", "mpc"];

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::ConfigInvalid(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::ConfigInvalid(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = &o.out {
            self.paths.out = v.clone();
        }
        if let Some(v) = &o.input {
            self.paths.input = Some(v.clone());
        }
        if let Some(v) = o.window_length {
            self.dataset.window_length = v;
        }
        if let Some(v) = o.ratio {
            self.dataset.ratio = v;
        }
        if let Some(v) = o.lr {
            self.train.learning_rate = v;
        }
        if let Some(v) = o.patience {
            self.train.patience = v;
        }
        if let Some(v) = o.max_epochs {
            self.train.max_epochs = v;
        }
        if let Some(v) = o.headway {
            self.detect.max_headway_s = v;
        }
        if let Some(v) = o.min_decel {
            self.detect.min_sv_decel = v;
        }
        if let Some(v) = &o.models {
            self.model.models = v.clone();
        }
    }

    /// Training settings with the run seed applied.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            ..self.train.clone()
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let invalid = |m: String| Err(PipelineError::ConfigInvalid(m));
        self.detect
            .validate()
            .map_err(|e| PipelineError::ConfigInvalid(e.to_string()))?;
        self.train_config()
            .validate()
            .map_err(|e| PipelineError::ConfigInvalid(e.to_string()))?;
        self.mpc
            .validate()
            .map_err(|e| PipelineError::ConfigInvalid(e.to_string()))?;
        if self.dataset.window_length == 0 || self.dataset.window_length >= crate::dataset::EVENT_ROWS {
            return invalid(format!(
                "window_length must be in 1..{}, got {}",
                crate::dataset::EVENT_ROWS,
                self.dataset.window_length
            ));
        }
        if !(self.dataset.ratio > 0.0 && self.dataset.ratio < 1.0) {
            return invalid(format!("ratio must be in (0, 1), got {}", self.dataset.ratio));
        }
        if self.model.width == 0 {
            return invalid("model width must be >= 1".into());
        }
        for m in self.model.models.iter().chain([&self.sim.controller]) {
            if !MODEL_NAMES.contains(&m.as_str()) {
                return invalid(format!("unknown model `{m}`; expected one of {MODEL_NAMES:?}"));
            }
        }
        if self.synth.recordings == 0 || self.synth.events_per_recording == 0 {
            return invalid("synth needs at least one recording and one event".into());
        }
        if !(self.sim.a_min < 0.0 && self.sim.a_max > 0.0) {
            return invalid("sim needs a_min < 0 < a_max".into());
        }
        Ok(())
    }

    /// Where recordings are read from.
    pub fn input_dir(&self) -> PathBuf {
        self.paths
            .input
            .clone()
            .unwrap_or_else(|| self.paths.out.join("recordings"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_toml() {
        let cfg = RunConfig::default();
        assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn partial_file_and_flags() {
        let mut cfg = RunConfig::from_toml("seed = 4\n[train]\npatience = 9\nmax_epochs = 3\n").unwrap();
        assert_eq!(cfg.seed, 4);
        assert_eq!(cfg.train.patience, 9);
        assert_eq!(cfg.train.learning_rate, 1e-4);
        cfg.apply(&Overrides {
            patience: Some(2),
            ..Overrides::default()
        });
        assert_eq!(cfg.train.patience, 2);
        assert_eq!(cfg.train.max_epochs, 3);
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(RunConfig::from_toml("[trian]\npatience = 1\n").is_err());
        let mut cfg = RunConfig::default();
        cfg.train.max_epochs = 0;
        assert!(matches!(cfg.validate(), Err(PipelineError::ConfigInvalid(_))));
        let mut cfg = RunConfig::default();
        cfg.model.models = vec!["gru".into()];
        assert!(cfg.validate().is_err());
    }
}
