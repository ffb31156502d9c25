//! Constant-headway linear-quadratic baseline.
//!
//! The controller picks one acceleration `a`, held over the whole horizon,
//! that minimizes
//!
//! ```text
//! Σ_{k=1..H} w_gap (g_k - τ v_k)² + w_rel_v (v_k - v_pv)² + w_accel a²
//! ```
//!
//! with the SV integrated as `v_k = v_{k-1} + a Δt`, `x_k = x_{k-1} + v_k Δt`
//! and the PV held at constant speed. Every residual is affine in `a`, so the
//! minimizer is a single division; it is then clamped to the actuator limits.

use serde::{Deserialize, Serialize};

use super::PredictError;
use crate::dataset::{FeatureRow, Features};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MpcConfig {
    pub horizon: usize,
    /// Desired time headway τ (s).
    pub headway: f64,
    pub w_gap: f64,
    pub w_rel_v: f64,
    pub w_accel: f64,
    pub a_min: f64,
    pub a_max: f64,
    /// Integration step (s).
    pub dt: f64,
}

impl Default for MpcConfig {
    fn default() -> Self {
        MpcConfig {
            horizon: 25,
            headway: 1.5,
            w_gap: 1.0,
            w_rel_v: 0.5,
            w_accel: 0.1,
            a_min: -4.0,
            a_max: 2.0,
            dt: 0.04,
        }
    }
}

impl MpcConfig {
    pub fn validate(&self) -> Result<(), PredictError> {
        if self.horizon == 0 {
            return Err(PredictError::DegenerateHorizon);
        }
        if self.w_gap < 0.0 || self.w_rel_v < 0.0 || self.w_accel < 0.0 {
            return Err(PredictError::InvalidConfig("MPC weights must be >= 0".into()));
        }
        if !(self.a_min < 0.0 && 0.0 < self.a_max) {
            return Err(PredictError::InvalidConfig("MPC needs a_min < 0 < a_max".into()));
        }
        if !(self.dt > 0.0) {
            return Err(PredictError::InvalidConfig("MPC dt must be > 0".into()));
        }
        Ok(())
    }

    /// Objective value for a constant control `a`, with the same rollout as
    /// the closed form.
    pub fn cost(&self, state: &MpcState, a: f64) -> f64 {
        let mut v = state.v_sv;
        let mut x_sv = 0.0;
        let mut x_pv = state.gap;
        let mut total = 0.0;
        for _ in 0..self.horizon {
            v += a * self.dt;
            x_sv += v * self.dt;
            x_pv += state.v_pv * self.dt;
            let gap_err = (x_pv - x_sv) - self.headway * v;
            let rel = v - state.v_pv;
            total += self.w_gap * gap_err * gap_err + self.w_rel_v * rel * rel + self.w_accel * a * a;
        }
        total
    }
}

/// The part of a frame the controller looks at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MpcState {
    /// Longitudinal separation `x_pv - x_sv` (m).
    pub gap: f64,
    pub v_sv: f64,
    pub v_pv: f64,
}

impl MpcState {
    pub fn from_features(f: &Features) -> Self {
        MpcState {
            gap: f[1] - f[0],
            v_sv: f[2],
            v_pv: f[3],
        }
    }

    pub fn from_row(row: &FeatureRow) -> Self {
        MpcState::from_features(&row.features())
    }
}

/// Optimal constant acceleration for the final frame of a window.
pub fn mpc_predict(state: &MpcState, cfg: &MpcConfig) -> Result<f64, PredictError> {
    cfg.validate()?;
    if state.v_sv < 0.0 || state.v_pv < 0.0 {
        return Err(PredictError::InvalidState("MPC needs non-negative speeds".into()));
    }
    let dt = cfg.dt;
    let (mut quad, mut lin) = (cfg.w_accel * cfg.horizon as f64, 0.0);
    for k in 1..=cfg.horizon {
        let kf = k as f64;
        // gap error: alpha_g + beta_g * a
        let alpha_g = state.gap + kf * dt * (state.v_pv - state.v_sv) - cfg.headway * state.v_sv;
        let beta_g = -dt * dt * kf * (kf + 1.0) / 2.0 - cfg.headway * kf * dt;
        // speed error: alpha_v + beta_v * a
        let alpha_v = state.v_sv - state.v_pv;
        let beta_v = kf * dt;
        quad += cfg.w_gap * beta_g * beta_g + cfg.w_rel_v * beta_v * beta_v;
        lin += cfg.w_gap * alpha_g * beta_g + cfg.w_rel_v * alpha_v * beta_v;
    }
    let a = if quad > 0.0 { -lin / quad } else { 0.0 };
    Ok(a.clamp(cfg.a_min, cfg.a_max))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MpcController {
    pub config: MpcConfig,
}

impl MpcController {
    pub fn new(config: MpcConfig) -> Result<Self, PredictError> {
        config.validate()?;
        Ok(MpcController { config })
    }
}
