//! Error metrics, model comparison and closed-loop cut-in simulation.

mod sim;

pub use sim::{simulate_cut_in, write_sim, ConstantController, Controller, ModelController, Playback, SimConfig, SimResult};

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{DatasetError, NormalizationStats, SequenceSample};
use crate::detect::EventKey;
use crate::predictors::{Model, PredictError};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("measured has {measured} values, predicted has {predicted}")]
    LengthMismatch { measured: usize, predicted: usize },
    #[error("no values to evaluate")]
    Empty,
    #[error("measured values span a zero range")]
    DegenerateRange,
    #[error("controller needs {needed} frames of history, only {available} available")]
    WindowUnderflow { needed: usize, available: usize },
    #[error("invalid simulation: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Predict(#[from] PredictError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = EvalError> = std::result::Result<T, E>;

fn check_pair(measured: &[f64], predicted: &[f64]) -> Result<()> {
    if measured.len() != predicted.len() {
        return Err(EvalError::LengthMismatch {
            measured: measured.len(),
            predicted: predicted.len(),
        });
    }
    if measured.is_empty() {
        return Err(EvalError::Empty);
    }
    Ok(())
}

pub fn mean(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(EvalError::Empty);
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Root mean square of `measured - predicted`.
pub fn rmse(measured: &[f64], predicted: &[f64]) -> Result<f64> {
    check_pair(measured, predicted)?;
    let sq: f64 = measured
        .iter()
        .zip(predicted)
        .map(|(y, p)| (y - p) * (y - p))
        .sum();
    Ok((sq / measured.len() as f64).sqrt())
}

/// `100 * max(0, 1 - rmse / range(measured))`.
pub fn accuracy_pct(measured: &[f64], predicted: &[f64]) -> Result<f64> {
    let e = rmse(measured, predicted)?;
    let (lo, hi) = measured
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &y| (lo.min(y), hi.max(y)));
    if !(hi > lo) {
        return Err(EvalError::DegenerateRange);
    }
    Ok(100.0 * (1.0 - e / (hi - lo)).max(0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelScore {
    pub model: String,
    /// m/s².
    pub rmse: f64,
    pub accuracy_pct: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub model: String,
    pub sample: usize,
    pub event: EventKey,
    pub offset: i64,
    pub measured: f64,
    pub predicted: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalReport {
    pub scores: Vec<ModelScore>,
    /// Mean of the measured targets, m/s².
    pub measured_mean: f64,
    pub residuals: Vec<Residual>,
    /// Where the training trace for these models was written, if anywhere.
    pub trace: Option<String>,
}

impl EvalReport {
    pub fn score(&self, model: &str) -> Option<&ModelScore> {
        self.scores.iter().find(|s| s.model == model)
    }
}

/// Predict every test window with every model and score in m/s².
pub fn evaluate_models(
    models: &[(&str, &Model)],
    test: &[SequenceSample],
    stats: &NormalizationStats,
) -> Result<EvalReport> {
    if test.is_empty() {
        return Err(EvalError::Empty);
    }
    let measured: Vec<f64> = test.iter().map(|s| stats.denormalize_target(s.target)).collect();
    let mut report = EvalReport {
        measured_mean: mean(&measured)?,
        ..EvalReport::default()
    };
    for &(name, model) in models {
        let predicted = test
            .iter()
            .map(|s| model.predict(&s.inputs, stats))
            .collect::<std::result::Result<Vec<f64>, _>>()?;
        report.scores.push(ModelScore {
            model: name.to_string(),
            rmse: rmse(&measured, &predicted)?,
            accuracy_pct: accuracy_pct(&measured, &predicted)?,
            n: test.len(),
        });
        report.residuals.extend(test.iter().zip(&measured).zip(predicted).enumerate().map(
            |(k, ((s, &y), p))| Residual {
                model: name.to_string(),
                sample: k,
                event: s.event,
                offset: s.offset,
                measured: y,
                predicted: p,
            },
        ));
    }
    Ok(report)
}

/// `model,rmse,accuracy_pct,n`.
pub fn write_metrics<W: Write>(report: &EvalReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["model", "rmse", "accuracy_pct", "n"])?;
    for s in &report.scores {
        w.write_record([s.model.clone(), s.rmse.to_string(), s.accuracy_pct.to_string(), s.n.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_residuals<W: Write>(report: &EvalReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "model",
        "sample",
        "recording_id",
        "sv_track_id",
        "pv_track_id",
        "cut_in_frame",
        "offset",
        "measured",
        "predicted",
        "residual",
    ])?;
    for r in &report.residuals {
        w.write_record([
            r.model.clone(),
            r.sample.to_string(),
            r.event.recording_id.to_string(),
            r.event.sv_track_id.to_string(),
            r.event.pv_track_id.to_string(),
            r.event.cut_in_frame.to_string(),
            r.offset.to_string(),
            r.measured.to_string(),
            r.predicted.to_string(),
            (r.measured - r.predicted).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
