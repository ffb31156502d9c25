//! Seeded synthetic highD-style recordings with scripted lane changes.
//!
//! Vehicles follow a gap/speed law, optionally with a reaction delay, and
//! lane changes switch `lane_id` at a scripted frame while `y` is blended
//! over 40 frames. Planted aggressive cut-ins come back as ground-truth
//! events in the detector's schema.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{SequenceSample, FEATURE_COUNT};
use crate::detect::{CutInEvent, EventKey, EVENT_HALF_WINDOW};
use crate::ingest::{build_track, mirror_track, Recording, TrackSample, DEFAULT_FRAME_RATE};

pub const A_MIN: f64 = -4.0;
pub const A_MAX: f64 = 2.0;
/// Frames over which `y` moves between lane centres.
pub const LANE_BLEND_FRAMES: i64 = 40;
/// Horizon used when filling `sv_min_accel_after` in ground truth.
const TRUTH_HORIZON: i64 = 40;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("infeasible script: {0}")]
    InfeasibleScript(String),
}

/// `a = k_g (gap - tau v) + k_v (v_lead - v)`, evaluated on the state
/// `reaction_delay` frames back.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FollowLaw {
    pub gap_gain: f64,
    pub speed_gain: f64,
    /// Desired time headway, s.
    pub headway_s: f64,
    pub reaction_delay: usize,
}

impl Default for FollowLaw {
    fn default() -> Self {
        FollowLaw {
            gap_gain: 0.2,
            speed_gain: 0.5,
            headway_s: 1.5,
            reaction_delay: 0,
        }
    }
}

/// Sinusoidal swing of the desired speed starting at `onset_frame`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedSwing {
    pub onset_frame: i64,
    pub amplitude: f64,
    pub period_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaneChange {
    pub frame: i64,
    pub target_lane: i64,
    /// Planted aggressive cut-in; reported in ground truth.
    pub aggressive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehiclePlan {
    pub track_id: i64,
    pub lane: i64,
    /// Rear bumper position at the first frame, m.
    pub x0: f64,
    pub v0: f64,
    pub desired_speed: f64,
    pub length: f64,
    pub width: f64,
    pub law: FollowLaw,
    pub lane_change: Option<LaneChange>,
    pub speed_swing: Option<SpeedSwing>,
}

impl VehiclePlan {
    pub fn car(track_id: i64, lane: i64, x0: f64, v0: f64) -> Self {
        VehiclePlan {
            track_id,
            lane,
            x0,
            v0,
            desired_speed: v0,
            length: 4.5,
            width: 1.8,
            law: FollowLaw::default(),
            lane_change: None,
            speed_swing: None,
        }
    }

    fn lane_at(&self, frame: i64) -> i64 {
        match self.lane_change {
            Some(c) if frame >= c.frame => c.target_lane,
            _ => self.lane,
        }
    }

    fn desired_at(&self, frame: i64, dt: f64) -> f64 {
        match self.speed_swing {
            Some(s) if frame >= s.onset_frame => {
                let t = (frame - s.onset_frame) as f64 * dt;
                self.desired_speed + s.amplitude * (2.0 * PI * t / s.period_s).sin()
            }
            _ => self.desired_speed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioScript {
    pub seed: u64,
    pub recording_id: i64,
    pub frame_rate: f64,
    /// Frames are numbered `1..=duration_frames`.
    pub duration_frames: i64,
    pub lane_count: i64,
    pub lane_width: f64,
    /// Std of the acceleration noise, m/s².
    pub noise_sigma: f64,
    /// Emit tracks travelling towards -x (mirrored about `road_length`).
    pub decreasing: bool,
    pub road_length: f64,
    pub vehicles: Vec<VehiclePlan>,
}

impl ScenarioScript {
    pub fn new(seed: u64, duration_frames: i64) -> Self {
        ScenarioScript {
            seed,
            recording_id: 1,
            frame_rate: DEFAULT_FRAME_RATE,
            duration_frames,
            lane_count: 3,
            lane_width: 3.75,
            noise_sigma: 0.0,
            decreasing: false,
            road_length: 4000.0,
            vehicles: Vec::new(),
        }
    }

    fn dt(&self) -> f64 {
        1.0 / self.frame_rate
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InfeasibleScript(m));
        if !(self.frame_rate > 0.0) || self.duration_frames < 2 {
            return bad("frame rate must be > 0 and duration at least 2 frames".into());
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return bad(format!("noise sigma {} is invalid", self.noise_sigma));
        }
        let lanes = 1..=self.lane_count;
        let mut ids: Vec<i64> = self.vehicles.iter().map(|v| v.track_id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return bad("duplicate track id".into());
        }
        for v in &self.vehicles {
            if !lanes.contains(&v.lane) {
                return bad(format!("track {} starts in lane {} outside 1..={}", v.track_id, v.lane, self.lane_count));
            }
            if !(v.v0 >= 0.0) || !(v.length > 0.0) || !(v.width > 0.0) || !v.x0.is_finite() {
                return bad(format!("track {} has an invalid initial state", v.track_id));
            }
            if let Some(c) = v.lane_change {
                let (lo, hi) = (EVENT_HALF_WINDOW + 1, self.duration_frames - EVENT_HALF_WINDOW - 1);
                if c.frame < lo || c.frame > hi {
                    return bad(format!(
                        "track {} changes lane at frame {}, outside {lo}..={hi}",
                        v.track_id, c.frame
                    ));
                }
                if !lanes.contains(&c.target_lane) || c.target_lane == v.lane {
                    return bad(format!("track {} has an invalid target lane {}", v.track_id, c.target_lane));
                }
            }
        }
        for (i, a) in self.vehicles.iter().enumerate() {
            for b in &self.vehicles[i + 1..] {
                if a.lane == b.lane && a.x0 < b.x0 + b.length && b.x0 < a.x0 + a.length {
                    return bad(format!("tracks {} and {} overlap at the first frame", a.track_id, b.track_id));
                }
            }
        }
        Ok(())
    }

    /// `n` independent aggressive cut-ins, one SV/PV pair each, spaced far
    /// apart along the road. PV ids are odd, SV ids even.
    pub fn planted_cut_ins(seed: u64, n: usize) -> Self {
        Self::planted_with(seed, n, 300, 0, None)
    }

    fn planted_with(seed: u64, n: usize, duration: i64, delay: usize, swing: Option<(f64, f64)>) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut script = ScenarioScript::new(seed, duration);
        script.noise_sigma = 0.05;
        let dt = script.dt();
        for k in 0..n {
            let base = 100.0 + 500.0 * (n - 1 - k) as f64;
            let v_sv: f64 = rng.random_range(22.0..30.0);
            let dv: f64 = rng.random_range(-0.5..0.5);
            let gap_at_cut_in: f64 = rng.random_range(6.0..15.0);
            let frame = rng.random_range(EVENT_HALF_WINDOW + 20..=duration - EVENT_HALF_WINDOW - 20);

            let mut sv = VehiclePlan::car(2 * k as i64 + 2, 2, base, v_sv);
            sv.law.reaction_delay = delay;
            let x_pv = base + sv.length + gap_at_cut_in - dv * (frame - 1) as f64 * dt;
            let mut pv = VehiclePlan::car(2 * k as i64 + 1, 3, x_pv, v_sv + dv);
            pv.lane_change = Some(LaneChange {
                frame,
                target_lane: 2,
                aggressive: true,
            });
            if let Some((amp, period)) = swing {
                pv.speed_swing = Some(SpeedSwing {
                    onset_frame: frame - rng.random_range(0..EVENT_HALF_WINDOW),
                    amplitude: rng.random_range(0.5..1.0) * amp,
                    period_s: rng.random_range(0.6..1.4) * period,
                });
            }
            script.vehicles.push(pv);
            script.vehicles.push(sv);
        }
        script
    }

    /// Traffic with only benign lane changes: every merge leaves the new
    /// follower more than four seconds behind.
    pub fn cut_in_free(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut script = ScenarioScript::new(seed, 300);
        script.noise_sigma = 0.05;
        let v: f64 = rng.random_range(24.0..28.0);
        let mut next_id = 1;
        let mut add = |script: &mut ScenarioScript, lane, x0, v0, change: Option<(i64, i64)>| {
            let mut p = VehiclePlan::car(next_id, lane, x0, v0);
            p.lane_change = change.map(|(frame, target_lane)| LaneChange {
                frame,
                target_lane,
                aggressive: false,
            });
            next_id += 1;
            script.vehicles.push(p);
        };
        let f1 = rng.random_range(80..150);
        let f2 = rng.random_range(150..220);
        add(&mut script, 1, 600.0, v, None);
        add(&mut script, 1, 400.0, v, Some((f1, 2)));
        add(&mut script, 2, 200.0, v, None);
        add(&mut script, 3, 450.0, v, Some((f2, 2)));
        add(&mut script, 3, 100.0, v, None);
        add(&mut script, 2, 10.0, v, None);
        script
    }

    /// Random traffic for property tests: up to `n_vehicles` cars spread
    /// over three lanes with random lane changes, some of them tight.
    pub fn random(seed: u64, n_vehicles: usize, duration: i64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut script = ScenarioScript::new(seed, duration);
        script.noise_sigma = rng.random_range(0.0..0.3);
        script.decreasing = rng.random_bool(0.3);
        let mut heads = [0.0f64; 3];
        for id in 1..=n_vehicles as i64 {
            let lane = rng.random_range(1..=3);
            let x0 = heads[(lane - 1) as usize] + rng.random_range(6.0..40.0);
            let v0 = rng.random_range(18.0..32.0);
            let mut p = VehiclePlan::car(id, lane, x0, v0);
            p.length = if rng.random_bool(0.15) { 12.0 } else { rng.random_range(3.8..5.2) };
            p.desired_speed = v0 + rng.random_range(-2.0..2.0);
            heads[(lane - 1) as usize] = x0 + p.length;
            if duration > 2 * EVENT_HALF_WINDOW + 2 && rng.random_bool(0.5) {
                let target = if lane != 2 {
                    2
                } else if rng.random_bool(0.5) {
                    1
                } else {
                    3
                };
                p.lane_change = Some(LaneChange {
                    frame: rng.random_range(EVENT_HALF_WINDOW + 1..=duration - EVENT_HALF_WINDOW - 1),
                    target_lane: target,
                    aggressive: false,
                });
            }
            script.vehicles.push(p);
        }
        script
    }
}

/// Simulated series for one vehicle, indexed by frame - 1.
struct Series {
    x: Vec<f64>,
    v: Vec<f64>,
    a: Vec<f64>,
}

/// A generated recording and the cut-ins planted in it.
#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub recording: Recording,
    pub ground_truth: Vec<CutInEvent>,
}

/// Integrate the script. Ground truth lists every aggressive lane change
/// whose target lane has a follower at the lane-change frame.
pub fn generate(script: &ScenarioScript) -> Result<Generated, SynthError> {
    script.validate()?;
    let n = script.vehicles.len();
    let steps = script.duration_frames as usize;
    let dt = script.dt();
    let mut rng = ChaCha8Rng::seed_from_u64(script.seed);
    let noise = Normal::new(0.0, script.noise_sigma).expect("validated sigma");

    let mut series: Vec<Series> = script
        .vehicles
        .iter()
        .map(|p| Series {
            x: vec![p.x0],
            v: vec![p.v0],
            a: Vec::with_capacity(steps),
        })
        .collect();

    for i in 0..steps {
        let frame = i as i64 + 1;
        let mut accel = vec![0.0; n];
        for (me, plan) in script.vehicles.iter().enumerate() {
            let j = i.saturating_sub(plan.law.reaction_delay);
            let lane = plan.lane_at(j as i64 + 1);
            let x = series[me].x[j];
            let v = series[me].v[j];
            let cruise = plan.law.speed_gain * (plan.desired_at(frame, dt) - v);
            let mut leader: Option<usize> = None;
            for (other, op) in script.vehicles.iter().enumerate() {
                if other == me || op.lane_at(j as i64 + 1) != lane || series[other].x[j] <= x {
                    continue;
                }
                if leader.is_none_or(|l| series[other].x[j] < series[l].x[j]) {
                    leader = Some(other);
                }
            }
            let law = match leader {
                Some(l) => {
                    let gap = series[l].x[j] - x - plan.length;
                    let follow = plan.law.gap_gain * (gap - plan.law.headway_s * v)
                        + plan.law.speed_gain * (series[l].v[j] - v);
                    cruise.min(follow)
                }
                None => cruise,
            };
            accel[me] = law.clamp(A_MIN, A_MAX);
        }
        for (me, a) in accel.iter_mut().enumerate() {
            if script.noise_sigma > 0.0 {
                *a += noise.sample(&mut rng);
            }
            let s = &mut series[me];
            let v = s.v[i];
            if i + 1 < steps {
                let v_next = (v + *a * dt).max(0.0);
                if v_next == 0.0 {
                    *a = -v / dt;
                }
                s.v.push(v_next);
                s.x.push(s.x[i] + v_next * dt);
            }
            s.a.push(*a);
        }
    }

    let tracks = script
        .vehicles
        .iter()
        .enumerate()
        .map(|(me, plan)| {
            let samples = (0..steps)
                .map(|i| {
                    let frame = i as i64 + 1;
                    let lane = plan.lane_at(frame);
                    let (y, vy, ay) = lateral(script, plan, frame);
                    let preceding = (0..n)
                        .filter(|&o| o != me && script.vehicles[o].lane_at(frame) == lane && series[o].x[i] > series[me].x[i])
                        .min_by(|&p, &q| series[p].x[i].total_cmp(&series[q].x[i]))
                        .map_or(0.0, |o| series[o].v[i]);
                    TrackSample {
                        frame,
                        track_id: plan.track_id,
                        x: series[me].x[i],
                        y,
                        width: plan.length,
                        height: plan.width,
                        x_velocity: series[me].v[i],
                        y_velocity: vy,
                        x_acceleration: series[me].a[i],
                        y_acceleration: ay,
                        preceding_x_velocity: preceding,
                        lane_id: lane,
                    }
                })
                .collect();
            build_track(plan.track_id, samples)
        })
        .collect();

    let recording = Recording::from_tracks(script.recording_id, script.frame_rate, Some(script.lane_count), tracks);
    let ground_truth = ground_truth(script, &series);
    let recording = if script.decreasing {
        Recording {
            tracks: recording
                .tracks
                .values()
                .map(|t| (t.track_id, mirror_track(t, script.road_length)))
                .map(|(id, mut t)| {
                    t.mirrored = false;
                    (id, t)
                })
                .collect(),
            ..recording
        }
    } else {
        recording
    };
    Ok(Generated { recording, ground_truth })
}

/// Lane-centre `y` with a smoothstep blend centred on the lane-change frame.
fn lateral(script: &ScenarioScript, plan: &VehiclePlan, frame: i64) -> (f64, f64, f64) {
    let centre = |lane: i64| (lane as f64 - 0.5) * script.lane_width;
    let Some(c) = plan.lane_change else {
        return (centre(plan.lane), 0.0, 0.0);
    };
    let start = c.frame - LANE_BLEND_FRAMES / 2;
    let u = ((frame - start) as f64 / LANE_BLEND_FRAMES as f64).clamp(0.0, 1.0);
    let span = centre(c.target_lane) - centre(plan.lane);
    let blend_s = LANE_BLEND_FRAMES as f64 / script.frame_rate;
    let inside = u > 0.0 && u < 1.0;
    let y = centre(plan.lane) + span * u * u * (3.0 - 2.0 * u);
    let vy = if inside { span * 6.0 * u * (1.0 - u) / blend_s } else { 0.0 };
    let ay = if inside { span * (6.0 - 12.0 * u) / (blend_s * blend_s) } else { 0.0 };
    (y, vy, ay)
}

fn ground_truth(script: &ScenarioScript, series: &[Series]) -> Vec<CutInEvent> {
    let mut events = Vec::new();
    for (pv, plan) in script.vehicles.iter().enumerate() {
        let Some(change) = plan.lane_change.filter(|c| c.aggressive) else {
            continue;
        };
        let i = (change.frame - 1) as usize;
        let follower = script
            .vehicles
            .iter()
            .enumerate()
            .filter(|&(o, p)| o != pv && p.lane_at(change.frame) == change.target_lane && series[o].x[i] < series[pv].x[i])
            .max_by(|a, b| series[a.0].x[i].total_cmp(&series[b.0].x[i]).then(b.1.track_id.cmp(&a.1.track_id)));
        let Some((sv, sv_plan)) = follower else {
            continue;
        };
        let end = (i + TRUTH_HORIZON as usize).min(series[sv].a.len() - 1);
        let min_accel = series[sv].a[i..=end].iter().copied().fold(f64::INFINITY, f64::min);
        events.push(CutInEvent {
            recording_id: script.recording_id,
            sv_track_id: sv_plan.track_id,
            pv_track_id: plan.track_id,
            cut_in_frame: change.frame,
            lane_from: plan.lane,
            lane_to: change.target_lane,
            gap_at_cut_in: series[pv].x[i] - series[sv].x[i] - sv_plan.length,
            sv_min_accel_after: min_accel,
        });
    }
    events.sort_by_key(|e| (e.cut_in_frame, e.pv_track_id));
    events
}

/// How targets in a sequence-dependent corpus were produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetDescription {
    /// Frames between the state the SV reacts to and its acceleration.
    pub lag: usize,
    pub law: FollowLaw,
    /// Std of the additive acceleration noise: the best achievable RMSE.
    pub noise_sigma: f64,
    pub frame_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceCorpus {
    pub recordings: Vec<Generated>,
    pub description: TargetDescription,
}

impl SequenceCorpus {
    pub fn events(&self) -> impl Iterator<Item = (&CutInEvent, &Recording)> {
        self.recordings
            .iter()
            .flat_map(|g| g.ground_truth.iter().map(move |e| (e, &g.recording)))
    }
}

const EVENTS_PER_RECORDING: usize = 4;

/// Cut-in recordings where the SV responds to the state `lag` frames back
/// and the PV's speed swings after the merge, so the next-step acceleration
/// depends on the window's history rather than its last frame alone.
pub fn sequence_dependent_corpus(seed: u64, n_events: usize, lag: usize) -> SequenceCorpus {
    let mut recordings = Vec::new();
    let mut remaining = n_events;
    let mut k = 0u64;
    let mut sigma = 0.0;
    while remaining > 0 {
        let n = remaining.min(EVENTS_PER_RECORDING);
        let mut script = ScenarioScript::planted_with(
            seed.wrapping_mul(1_000_003).wrapping_add(k),
            n,
            300,
            lag,
            Some((3.0, 2.5)),
        );
        script.recording_id = k as i64 + 1;
        sigma = script.noise_sigma;
        recordings.push(generate(&script).expect("planted scripts are feasible"));
        remaining -= n;
        k += 1;
    }
    SequenceCorpus {
        recordings,
        description: TargetDescription {
            lag,
            law: FollowLaw {
                reaction_delay: lag,
                ..FollowLaw::default()
            },
            noise_sigma: sigma,
            frame_rate: DEFAULT_FRAME_RATE,
        },
    }
}

/// Already-normalized windows whose target is a fixed linear map of the
/// last frame plus Gaussian noise of std `noise`.
pub fn linear_corpus(seed: u64, n_events: usize, per_event: usize, window: usize, noise: f64) -> Vec<SequenceSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let eps = Normal::new(0.0, noise).expect("noise std must be >= 0");
    let w = LINEAR_WEIGHTS;
    let mut out = Vec::with_capacity(n_events * per_event);
    for e in 0..n_events {
        let event = EventKey {
            recording_id: 0,
            sv_track_id: e as i64,
            pv_track_id: -1,
            cut_in_frame: 0,
        };
        for k in 0..per_event {
            let inputs: Vec<[f64; FEATURE_COUNT]> = (0..window)
                .map(|_| std::array::from_fn(|_| unit.sample(&mut rng)))
                .collect();
            let last = inputs[window - 1];
            let target = last.iter().zip(w).map(|(x, w)| x * w).sum::<f64>() + eps.sample(&mut rng);
            out.push(SequenceSample {
                inputs,
                target,
                event,
                offset: k as i64,
            });
        }
    }
    out
}

/// Unit-norm weights of [`linear_corpus`].
pub const LINEAR_WEIGHTS: [f64; FEATURE_COUNT] = [0.5, -0.5, 0.5, 0.3, -0.4];
