//! Generate scripted highway traffic and write it as highD-style CSV.
//!
//!     cargo run --example synth_scenarios [out_dir] [seed]

use std::fs::{self, File};
use std::path::PathBuf;

use cutin_acc::detect::write_events;
use cutin_acc::ingest::write_tracks;
use cutin_acc::synth::{generate, ScenarioScript};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "synth_out".into()));
    let seed: u64 = args.next().map_or(Ok(0), |s| s.parse())?;
    fs::create_dir_all(&dir)?;

    let mut decreasing = ScenarioScript::planted_cut_ins(seed, 3);
    decreasing.decreasing = true;
    let scripts = [
        ("planted", ScenarioScript::planted_cut_ins(seed, 3)),
        ("planted_mirrored", decreasing),
        ("free", ScenarioScript::cut_in_free(seed)),
        ("random", ScenarioScript::random(seed, 8, 400)),
    ];
    for (i, (name, mut script)) in scripts.into_iter().enumerate() {
        script.recording_id = i as i64 + 1;
        let g = generate(&script)?;
        let path = dir.join(format!("{:02}_tracks.csv", script.recording_id));
        write_tracks(&g.recording, File::create(&path)?)?;
        write_events(&g.ground_truth, File::create(dir.join(format!("{:02}_truth.csv", script.recording_id)))?)?;
        println!(
            "{name:>16}: {} vehicles, {} frames, {} planted cut-ins -> {}",
            script.vehicles.len(),
            script.duration_frames,
            g.ground_truth.len(),
            path.display()
        );
    }
    Ok(())
}
