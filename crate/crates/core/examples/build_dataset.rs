//! Turn detected cut-ins into windowed, split and normalized samples.
//!
//!     cargo run --example build_dataset [window]

use cutin_acc::dataset::{build_dataset, DistanceMode, FEATURE_COUNT, FEATURE_NAMES};
use cutin_acc::detect::{detect_cut_ins, DetectorConfig};
use cutin_acc::ingest::normalize_direction;
use cutin_acc::synth::{generate, ScenarioScript};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let window: usize = std::env::args().nth(1).map_or(Ok(20), |s| s.parse())?;
    let recs = (0..3)
        .map(|seed| {
            let mut script = ScenarioScript::planted_cut_ins(seed, 4);
            script.recording_id = seed as i64 + 1;
            Ok(normalize_direction(&generate(&script)?.recording)?)
        })
        .collect::<Result<Vec<_>, Box<dyn std::error::Error>>>()?;
    let mut events = Vec::new();
    for r in &recs {
        events.extend(detect_cut_ins(r, &DetectorConfig::default())?.into_iter().map(|e| (e, r)));
    }
    let split = build_dataset(&events, window, DistanceMode::ToCutInPoint, 0.8, 0)?;
    println!(
        "{} events -> {} train / {} test windows of {window} frames (train share {:.3})",
        events.len(),
        split.train.len(),
        split.test.len(),
        split.train_fraction()
    );
    println!("{:>6} {:>10} {:>9}", "feature", "mean", "std");
    for (i, name) in FEATURE_NAMES.iter().enumerate() {
        println!("{name:>6} {:>10.3} {:>9.3}", split.stats.mean[i], split.stats.std[i]);
    }
    println!("target {:>10.3} {:>9.3}", split.stats.mean[FEATURE_COUNT], split.stats.std[FEATURE_COUNT]);
    Ok(())
}
