//! Oracles shared by several test targets.

use cutin_acc::detect::{CutInEvent, DetectorConfig};
use cutin_acc::ingest::{Recording, TrackSample};

/// Every (sv, pv, frame) triple checked directly against the definition.
pub fn brute_force(rec: &Recording, cfg: &DetectorConfig) -> Vec<CutInEvent> {
    let mut out = Vec::new();
    let at = |id: i64, f: i64| -> Option<&TrackSample> { rec.tracks[&id].samples.iter().find(|s| s.frame == f) };
    let covers = |id: i64, lo: i64, hi: i64| (lo..=hi).all(|f| at(id, f).is_some());
    for &pv in rec.tracks.keys() {
        for &sv in rec.tracks.keys() {
            if sv == pv {
                continue;
            }
            for s in &rec.tracks[&sv].samples {
                let f = s.frame;
                let (Some(p_prev), Some(p)) = (at(pv, f - 1), at(pv, f)) else { continue };
                if p_prev.lane_id == p.lane_id || s.lane_id != p.lane_id {
                    continue;
                }
                if s.x >= p.x {
                    continue;
                }
                let blocked = rec.tracks.keys().any(|&k| {
                    if k == sv || k == pv {
                        return false;
                    }
                    at(k, f).is_some_and(|o| {
                        o.lane_id == p.lane_id && o.x < p.x && (o.x > s.x || (o.x == s.x && k < sv))
                    })
                });
                if blocked {
                    continue;
                }
                let gap = p.x - s.x - s.width;
                if !(gap > cfg.min_gap_m && gap / s.x_velocity.max(0.1) < cfg.max_headway_s) {
                    continue;
                }
                if !covers(sv, f - 40, f + 40) || !covers(pv, f - 40, f + 40) {
                    continue;
                }
                let min_acc = (f..=f + cfg.decel_horizon_frames)
                    .filter_map(|g| at(sv, g))
                    .map(|q| q.x_acceleration)
                    .fold(f64::INFINITY, f64::min);
                if min_acc < cfg.min_sv_decel {
                    out.push(CutInEvent {
                        recording_id: rec.recording_id,
                        sv_track_id: sv,
                        pv_track_id: pv,
                        cut_in_frame: f,
                        lane_from: p_prev.lane_id,
                        lane_to: p.lane_id,
                        gap_at_cut_in: gap,
                        sv_min_accel_after: min_acc,
                    });
                }
            }
        }
    }
    out.sort_by_key(|e| (e.cut_in_frame, e.pv_track_id));
    out
}
