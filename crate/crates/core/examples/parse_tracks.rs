//! Parse a highD-style `tracks.csv` and normalize driving direction.
//!
//!     cargo run --example parse_tracks [path/to/01_tracks.csv]
//!
//! Without a path, a synthetic recording driving in -x is used.

use std::fs::File;

use cutin_acc::ingest::{normalize_direction, parse_tracks, write_tracks, Recording, DEFAULT_FRAME_RATE};
use cutin_acc::synth::{generate, ScenarioScript};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let raw: Recording = match std::env::args().nth(1) {
        Some(path) => parse_tracks(File::open(path)?, 1, DEFAULT_FRAME_RATE)?,
        None => {
            let mut script = ScenarioScript::random(3, 6, 250);
            script.decreasing = true;
            let mut csv = Vec::new();
            write_tracks(&generate(&script)?.recording, &mut csv)?;
            parse_tracks(csv.as_slice(), 1, DEFAULT_FRAME_RATE)?
        }
    };
    let rec = normalize_direction(&raw)?;
    println!(
        "recording {}: {} tracks, {} rows, {} lanes, mirror axis {:?}",
        rec.recording_id,
        rec.tracks.len(),
        rec.sample_count(),
        rec.lane_count,
        rec.mirror_axis
    );
    println!("{:>5} {:>6} {:>9} {:>7} {:>9} {:>9}", "id", "class", "frames", "length", "median_vx", "mirrored");
    for t in rec.tracks.values() {
        println!(
            "{:>5} {:>6} {:>4}-{:<4} {:>7.2} {:>9.2} {:>9}",
            t.track_id,
            format!("{:?}", t.vehicle_class),
            t.first_frame(),
            t.last_frame(),
            t.length(),
            t.median_x_velocity(),
            t.mirrored
        );
    }
    Ok(())
}
