//! Screening of direction-normalized recordings for aggressive cut-ins.
//!
//! A cut-in is a preceding vehicle (PV) moving into the lane of a subject
//! vehicle (SV) with a short time headway, after which the SV brakes.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{Recording, Track, TrackSample};

/// Frames kept on each side of the cut-in frame.
pub const EVENT_HALF_WINDOW: i64 = 40;

/// Follower speed floor (m/s) used in the headway ratio.
const HEADWAY_SPEED_FLOOR: f64 = 0.1;

#[derive(Debug, Error)]
pub enum DetectError {
    #[error("recording {0} has not been direction-normalized")]
    NotNormalized(i64),
    #[error("invalid detector config: {0}")]
    InvalidConfig(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    /// Upper bound on bumper gap / SV speed at the cut-in frame (s).
    pub max_headway_s: f64,
    /// SV must brake harder than this (m/s², negative) soon after the cut-in.
    pub min_sv_decel: f64,
    /// Frames after the cut-in searched for the SV braking.
    pub decel_horizon_frames: i64,
    /// Smallest admissible bumper gap (m).
    pub min_gap_m: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            max_headway_s: 2.0,
            min_sv_decel: -0.5,
            decel_horizon_frames: 40,
            min_gap_m: 0.5,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<(), DetectError> {
        if !(self.max_headway_s > 0.0) {
            return Err(DetectError::InvalidConfig("max_headway_s must be > 0".into()));
        }
        if !(self.min_sv_decel < 0.0) {
            return Err(DetectError::InvalidConfig("min_sv_decel must be < 0".into()));
        }
        if self.decel_horizon_frames < 1 {
            return Err(DetectError::InvalidConfig("decel_horizon_frames must be >= 1".into()));
        }
        if !self.min_gap_m.is_finite() {
            return Err(DetectError::InvalidConfig("min_gap_m must be finite".into()));
        }
        Ok(())
    }
}

/// One detected aggressive lane change.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutInEvent {
    pub recording_id: i64,
    pub sv_track_id: i64,
    pub pv_track_id: i64,
    /// First frame at which the PV reports the SV's lane.
    pub cut_in_frame: i64,
    pub lane_from: i64,
    pub lane_to: i64,
    /// Bumper gap PV rear to SV front at the cut-in frame (m).
    pub gap_at_cut_in: f64,
    /// Minimum SV x acceleration within the braking horizon (m/s²).
    pub sv_min_accel_after: f64,
}

impl CutInEvent {
    pub fn key(&self) -> EventKey {
        EventKey {
            recording_id: self.recording_id,
            sv_track_id: self.sv_track_id,
            pv_track_id: self.pv_track_id,
            cut_in_frame: self.cut_in_frame,
        }
    }

    pub fn window(&self) -> (i64, i64) {
        (
            self.cut_in_frame - EVENT_HALF_WINDOW,
            self.cut_in_frame + EVENT_HALF_WINDOW,
        )
    }
}

/// Identity of an event, used to tag dataset windows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EventKey {
    pub recording_id: i64,
    pub sv_track_id: i64,
    pub pv_track_id: i64,
    pub cut_in_frame: i64,
}

/// Bumper gap between a follower and a leader sample.
pub fn bumper_gap(follower: &TrackSample, leader: &TrackSample) -> f64 {
    leader.x - follower.x - follower.width
}

/// The vehicle in `lane` directly behind `leader_id` at `frame`, if any.
pub fn nearest_follower(
    recording: &Recording,
    leader_id: i64,
    lane: i64,
    frame: i64,
) -> Option<&Track> {
    let leader_x = recording.track(leader_id)?.at(frame)?.x;
    let mut best: Option<(&Track, f64)> = None;
    for track in recording.tracks.values() {
        if track.track_id == leader_id {
            continue;
        }
        let Some(s) = track.at(frame) else { continue };
        if s.lane_id != lane || s.x >= leader_x {
            continue;
        }
        if best.is_none_or(|(_, x)| s.x > x) {
            best = Some((track, s.x));
        }
    }
    best.map(|(t, _)| t)
}

/// Check conditions (b)-(d) for a given SV and PV at a lane transition and
/// build the event if they hold.
fn qualify(
    recording: &Recording,
    config: &DetectorConfig,
    sv: &Track,
    pv: &Track,
    frame: i64,
    lane_from: i64,
    lane_to: i64,
) -> Option<CutInEvent> {
    let (lo, hi) = (frame - EVENT_HALF_WINDOW, frame + EVENT_HALF_WINDOW);
    if !sv.covers(lo, hi) || !pv.covers(lo, hi) {
        return None;
    }
    let s = sv.at(frame)?;
    let p = pv.at(frame)?;
    if s.lane_id != lane_to {
        return None;
    }
    let gap = bumper_gap(s, p);
    if gap <= config.min_gap_m {
        return None;
    }
    if gap / s.x_velocity.max(HEADWAY_SPEED_FLOOR) >= config.max_headway_s {
        return None;
    }
    let end = (frame + config.decel_horizon_frames).min(sv.last_frame());
    let min_accel = (frame..=end)
        .filter_map(|f| sv.at(f))
        .map(|s| s.x_acceleration)
        .fold(f64::INFINITY, f64::min);
    if !(min_accel < config.min_sv_decel) {
        return None;
    }
    Some(CutInEvent {
        recording_id: recording.recording_id,
        sv_track_id: sv.track_id,
        pv_track_id: pv.track_id,
        cut_in_frame: frame,
        lane_from,
        lane_to,
        gap_at_cut_in: gap,
        sv_min_accel_after: min_accel,
    })
}

/// Find every aggressive cut-in in a normalized recording.
///
/// Each PV lane transition yields at most one event, bound to the nearest
/// follower in the target lane. Events are ordered by (frame, PV id).
pub fn detect_cut_ins(
    recording: &Recording,
    config: &DetectorConfig,
) -> Result<Vec<CutInEvent>, DetectError> {
    if !recording.normalized {
        return Err(DetectError::NotNormalized(recording.recording_id));
    }
    config.validate()?;
    let mut events = Vec::new();
    for pv in recording.tracks.values() {
        for pair in pv.samples.windows(2) {
            let (before, at) = (&pair[0], &pair[1]);
            if before.lane_id == at.lane_id {
                continue;
            }
            let Some(sv) = nearest_follower(recording, pv.track_id, at.lane_id, at.frame) else {
                continue;
            };
            if let Some(event) =
                qualify(recording, config, sv, pv, at.frame, before.lane_id, at.lane_id)
            {
                events.push(event);
            }
        }
    }
    events.sort_by_key(|e| (e.cut_in_frame, e.pv_track_id));
    Ok(events)
}

/// Re-check an event against the recording from scratch.
pub fn verify_event(recording: &Recording, config: &DetectorConfig, event: &CutInEvent) -> bool {
    let (Some(sv), Some(pv)) = (
        recording.track(event.sv_track_id),
        recording.track(event.pv_track_id),
    ) else {
        return false;
    };
    let (Some(prev), Some(now)) = (pv.at(event.cut_in_frame - 1), pv.at(event.cut_in_frame))
    else {
        return false;
    };
    if prev.lane_id != event.lane_from || now.lane_id != event.lane_to || event.lane_from == event.lane_to {
        return false;
    }
    let nearest = nearest_follower(recording, pv.track_id, event.lane_to, event.cut_in_frame);
    if nearest.map(|t| t.track_id) != Some(sv.track_id) {
        return false;
    }
    qualify(
        recording,
        config,
        sv,
        pv,
        event.cut_in_frame,
        event.lane_from,
        event.lane_to,
    )
    .is_some_and(|e| e == *event)
}

/// Number of frame-to-frame lane id changes over all tracks.
pub fn count_lane_changes(recording: &Recording) -> usize {
    recording
        .tracks
        .values()
        .map(|t| {
            t.samples
                .windows(2)
                .filter(|w| w[0].lane_id != w[1].lane_id)
                .count()
        })
        .sum()
}

pub fn write_events<W: Write>(events: &[CutInEvent], out: W) -> Result<(), DetectError> {
    let mut writer = csv::Writer::from_writer(out);
    if events.is_empty() {
        writer.write_record([
            "recording_id",
            "sv_track_id",
            "pv_track_id",
            "cut_in_frame",
            "lane_from",
            "lane_to",
            "gap_at_cut_in",
            "sv_min_accel_after",
        ])?;
    }
    for e in events {
        writer.serialize(e)?;
    }
    writer.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_events<R: Read>(input: R) -> Result<Vec<CutInEvent>, DetectError> {
    let mut reader = csv::Reader::from_reader(input);
    let events = reader.deserialize().collect::<Result<Vec<CutInEvent>, _>>()?;
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{build_track, normalize_direction, Recording};

    fn sample(frame: i64, id: i64, x: f64, v: f64, a: f64, lane: i64) -> TrackSample {
        TrackSample {
            frame,
            track_id: id,
            x,
            y: 0.0,
            width: 4.5,
            height: 1.8,
            x_velocity: v,
            y_velocity: 0.0,
            x_acceleration: a,
            y_acceleration: 0.0,
            preceding_x_velocity: 0.0,
            lane_id: lane,
        }
    }

    /// SV in lane 2, PV in lane 3 moving into lane 2 at frame 100, SV brakes
    /// from frame 100 on.
    fn planted(frames: i64) -> Recording {
        let dt = 0.04;
        let sv: Vec<_> = (1..=frames)
            .map(|f| {
                let a = if (100..130).contains(&f) { -2.0 } else { 0.0 };
                sample(f, 1, 20.0 + 25.0 * dt * f as f64, 25.0, a, 2)
            })
            .collect();
        let pv: Vec<_> = (1..=frames)
            .map(|f| {
                let lane = if f >= 100 { 2 } else { 3 };
                sample(f, 2, 32.0 + 25.0 * dt * f as f64, 25.0, 0.0, lane)
            })
            .collect();
        let rec = Recording::from_tracks(1, 25.0, None, vec![build_track(1, sv), build_track(2, pv)]);
        normalize_direction(&rec).unwrap()
    }

    #[test]
    fn single_vehicle_has_no_events() {
        let t = build_track(1, (1..=200).map(|f| sample(f, 1, f as f64, 25.0, -1.0, 1)).collect());
        let rec = normalize_direction(&Recording::from_tracks(1, 25.0, None, vec![t])).unwrap();
        assert!(detect_cut_ins(&rec, &DetectorConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn planted_event_found() {
        let rec = planted(200);
        let events = detect_cut_ins(&rec, &DetectorConfig::default()).unwrap();
        assert_eq!(events.len(), 1);
        let e = events[0];
        assert_eq!(e.cut_in_frame, 100);
        assert_eq!((e.sv_track_id, e.pv_track_id), (1, 2));
        assert_eq!((e.lane_from, e.lane_to), (3, 2));
        assert!((e.gap_at_cut_in - 7.5).abs() < 1e-9);
        assert_eq!(e.sv_min_accel_after, -2.0);
        assert!(verify_event(&rec, &DetectorConfig::default(), &e));
    }

    #[test]
    fn short_tracks_fail_window_condition() {
        let rec = planted(139);
        assert!(detect_cut_ins(&rec, &DetectorConfig::default()).unwrap().is_empty());
        let rec = planted(140);
        assert_eq!(detect_cut_ins(&rec, &DetectorConfig::default()).unwrap().len(), 1);
    }

    #[test]
    fn thresholds_gate_the_event() {
        let rec = planted(200);
        let strict_headway = DetectorConfig {
            max_headway_s: 0.2,
            ..DetectorConfig::default()
        };
        assert!(detect_cut_ins(&rec, &strict_headway).unwrap().is_empty());
        let strict_decel = DetectorConfig {
            min_sv_decel: -3.0,
            ..DetectorConfig::default()
        };
        assert!(detect_cut_ins(&rec, &strict_decel).unwrap().is_empty());
    }

    #[test]
    fn unnormalized_recording_rejected() {
        let mut rec = planted(200);
        rec.normalized = false;
        assert!(matches!(
            detect_cut_ins(&rec, &DetectorConfig::default()),
            Err(DetectError::NotNormalized(1))
        ));
    }

    #[test]
    fn invalid_config_rejected() {
        let rec = planted(200);
        let bad = DetectorConfig {
            min_sv_decel: 0.5,
            ..DetectorConfig::default()
        };
        assert!(matches!(detect_cut_ins(&rec, &bad), Err(DetectError::InvalidConfig(_))));
    }

    #[test]
    fn lane_change_counting() {
        let lanes = [3, 3, 2, 2];
        let t = build_track(
            1,
            lanes
                .iter()
                .enumerate()
                .map(|(i, &l)| sample(i as i64 + 1, 1, i as f64, 1.0, 0.0, l))
                .collect(),
        );
        let constant = build_track(2, (1..=4).map(|f| sample(f, 2, f as f64, 1.0, 0.0, 1)).collect());
        let rec = Recording::from_tracks(1, 25.0, None, vec![t, constant.clone()]);
        assert_eq!(count_lane_changes(&rec), 1);
        let rec = Recording::from_tracks(1, 25.0, None, vec![constant]);
        assert_eq!(count_lane_changes(&rec), 0);
    }

    #[test]
    fn events_round_trip_through_csv() {
        let rec = planted(200);
        let events = detect_cut_ins(&rec, &DetectorConfig::default()).unwrap();
        let mut buf = Vec::new();
        write_events(&events, &mut buf).unwrap();
        assert_eq!(read_events(buf.as_slice()).unwrap(), events);

        let mut empty = Vec::new();
        write_events(&[], &mut empty).unwrap();
        assert!(String::from_utf8(empty.clone()).unwrap().starts_with("recording_id,"));
        assert!(read_events(empty.as_slice()).unwrap().is_empty());
    }
}
