//! Screen a recording for aggressive cut-ins.
//!
//!     cargo run --example detect_cut_ins [headway_s] [min_decel]

use cutin_acc::detect::{detect_cut_ins, DetectorConfig};
use cutin_acc::ingest::normalize_direction;
use cutin_acc::synth::{generate, ScenarioScript};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let mut cfg = DetectorConfig::default();
    if let Some(h) = args.next() {
        cfg.max_headway_s = h.parse()?;
    }
    if let Some(d) = args.next() {
        cfg.min_sv_decel = d.parse()?;
    }
    cfg.validate()?;

    let g = generate(&ScenarioScript::planted_cut_ins(42, 5))?;
    let rec = normalize_direction(&g.recording)?;
    let found = detect_cut_ins(&rec, &cfg)?;
    println!("{} planted, {} detected with {cfg:?}", g.ground_truth.len(), found.len());
    for e in &found {
        println!(
            "frame {:>4}: pv {:>2} lane {} -> {} ahead of sv {:>2}, gap {:5.2} m, sv min accel {:5.2} m/s2",
            e.cut_in_frame, e.pv_track_id, e.lane_from, e.lane_to, e.sv_track_id, e.gap_at_cut_in, e.sv_min_accel_after
        );
    }
    Ok(())
}
