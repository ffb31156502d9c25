use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{EvalError, Result};
use crate::dataset::{extract_rows_with, DistanceMode, FeatureRow, Features, NormalizationStats};
use crate::detect::{CutInEvent, EVENT_HALF_WINDOW};
use crate::ingest::Recording;
use crate::predictors::Model;

/// Produces a commanded SV acceleration from the most recent feature rows.
pub trait Controller {
    /// Rows the controller wants to see; the last one is the current state.
    fn window(&self) -> usize;
    fn command(&mut self, rows: &[FeatureRow]) -> Result<f64>;
}

/// Always commands the same acceleration.
#[derive(Debug, Clone, Copy)]
pub struct ConstantController(pub f64);

impl Controller for ConstantController {
    fn window(&self) -> usize {
        1
    }
    fn command(&mut self, _: &[FeatureRow]) -> Result<f64> {
        Ok(self.0)
    }
}

/// Drives the SV with a predictor's next-step acceleration.
#[derive(Debug, Clone)]
pub struct ModelController {
    pub model: Model,
    pub stats: NormalizationStats,
    pub window: usize,
}

impl Controller for ModelController {
    fn window(&self) -> usize {
        self.window
    }
    fn command(&mut self, rows: &[FeatureRow]) -> Result<f64> {
        let window: Vec<Features> = rows
            .iter()
            .map(|r| self.stats.normalize_features(&r.features()))
            .collect();
        Ok(self.model.predict(&window, &self.stats)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub dt: f64,
    pub a_min: f64,
    pub a_max: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 0.04,
            a_min: -4.0,
            a_max: 2.0,
        }
    }
}

/// A recorded PV trajectory plus the SV's recorded lead-in.
#[derive(Debug, Clone, PartialEq)]
pub struct Playback {
    /// PV (x, v) for every simulated step.
    pub pv: Vec<(f64, f64)>,
    /// Recorded SV rows preceding the first simulated step, oldest first.
    pub history: Vec<FeatureRow>,
    pub sv_x0: f64,
    pub sv_v0: f64,
    pub sv_length: f64,
    pub mode: DistanceMode,
    /// PV position at the cut-in frame, used by [`DistanceMode::ToCutInPoint`].
    pub pv_cut_in_x: f64,
}

impl Playback {
    /// Replay the PV from `warmup` frames into the event window to its end,
    /// with the SV's recorded rows before that as warm-up history.
    pub fn from_event(
        event: &CutInEvent,
        recording: &Recording,
        warmup: usize,
        mode: DistanceMode,
    ) -> Result<Self> {
        let rows = extract_rows_with(event, recording, mode)?;
        if warmup >= rows.rows.len() {
            return Err(EvalError::InvalidConfig(format!(
                "warm-up of {warmup} frames leaves nothing to simulate"
            )));
        }
        let start = &rows.rows[warmup];
        let sv_length = recording
            .track(event.sv_track_id)
            .map(|t| t.length())
            .unwrap_or_default();
        let pv_cut_in_x = rows.rows[EVENT_HALF_WINDOW as usize].x_pv;
        Ok(Playback {
            pv: rows.rows[warmup..].iter().map(|r| (r.x_pv, r.v_pv)).collect(),
            history: rows.rows[..warmup].to_vec(),
            sv_x0: start.x_sv,
            sv_v0: start.v_sv,
            sv_length,
            mode,
            pv_cut_in_x,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SimResult {
    pub dt: f64,
    pub t: Vec<f64>,
    pub x_sv: Vec<f64>,
    pub v_sv: Vec<f64>,
    /// Executed (clamped) acceleration applied from each step to the next.
    pub a_sv: Vec<f64>,
    pub a_commanded: Vec<f64>,
    pub x_pv: Vec<f64>,
    pub v_pv: Vec<f64>,
    /// Bumper gap, m.
    pub gap: Vec<f64>,
    pub min_gap: f64,
    pub collision: bool,
}

/// Closed-loop replay of a cut-in with the SV under `controller`.
///
/// Stops at the end of the PV trajectory or as soon as the gap closes.
pub fn simulate_cut_in<C: Controller + ?Sized>(
    playback: &Playback,
    controller: &mut C,
    config: &SimConfig,
) -> Result<SimResult> {
    if !(config.dt > 0.0) || !(config.a_min <= config.a_max) {
        return Err(EvalError::InvalidConfig("need dt > 0 and a_min <= a_max".into()));
    }
    if playback.pv.is_empty() {
        return Err(EvalError::Empty);
    }
    let need = controller.window();
    if playback.history.len() + 1 < need {
        return Err(EvalError::WindowUnderflow {
            needed: need,
            available: playback.history.len() + 1,
        });
    }
    let mut rows = playback.history.clone();
    let mut out = SimResult {
        dt: config.dt,
        min_gap: f64::INFINITY,
        ..SimResult::default()
    };
    let (mut x, mut v) = (playback.sv_x0, playback.sv_v0.max(0.0));
    let mut last_a = rows.last().map_or(0.0, |r| r.acc_sv);
    for (k, &(x_pv, v_pv)) in playback.pv.iter().enumerate() {
        let gap = x_pv - x - playback.sv_length;
        out.t.push(k as f64 * config.dt);
        out.x_sv.push(x);
        out.v_sv.push(v);
        out.x_pv.push(x_pv);
        out.v_pv.push(v_pv);
        out.gap.push(gap);
        out.min_gap = out.min_gap.min(gap);
        if gap <= 0.0 {
            out.collision = true;
            out.a_sv.push(0.0);
            out.a_commanded.push(0.0);
            break;
        }
        rows.push(FeatureRow {
            x_sv: x,
            x_pv,
            v_sv: v,
            v_pv,
            d: match playback.mode {
                DistanceMode::ToCutInPoint => playback.pv_cut_in_x - x,
                DistanceMode::CurrentSeparation => x_pv - x,
            },
            acc_sv: last_a,
        });
        let cmd = controller.command(&rows[rows.len() - need..])?;
        let a = cmd.clamp(config.a_min, config.a_max);
        out.a_commanded.push(cmd);
        out.a_sv.push(a);
        last_a = a;
        v = (v + a * config.dt).max(0.0);
        x += v * config.dt;
    }
    Ok(out)
}

/// `t,x_sv,v_sv,a_sv,x_pv,v_pv,gap` per step.
pub fn write_sim<W: Write>(result: &SimResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "x_sv", "v_sv", "a_sv", "x_pv", "v_pv", "gap"])?;
    for k in 0..result.t.len() {
        w.write_record(
            [
                result.t[k],
                result.x_sv[k],
                result.v_sv[k],
                result.a_sv[k],
                result.x_pv[k],
                result.v_pv[k],
                result.gap[k],
            ]
            .map(|v| v.to_string()),
        )?;
    }
    w.flush()?;
    Ok(())
}
