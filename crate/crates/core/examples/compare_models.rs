//! LSTM, ANN and MPC on the lag-dependent synthetic corpus, with error by
//! position relative to the cut-in.
//!
//!     cargo run --release --example compare_models [events] [lag] [width] [lr] [seed]

use std::collections::BTreeMap;

use cutin_acc::dataset::{build_dataset, DistanceMode};
use cutin_acc::detect::{detect_cut_ins, DetectorConfig};
use cutin_acc::evaluation::evaluate_models;
use cutin_acc::ingest::normalize_direction;
use cutin_acc::predictors::{
    train, AnnConfig, AnnNet, LstmNet, LstmNetConfig, Model, MpcConfig, MpcController, TrainConfig,
};
use cutin_acc::synth::sequence_dependent_corpus;

fn arg<T: std::str::FromStr>(i: usize, default: T) -> T {
    std::env::args().nth(i).and_then(|s| s.parse().ok()).unwrap_or(default)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let (n_events, lag, width, lr, seed) = (arg(1, 80), arg(2, 10), arg(3, 32), arg(4, 1e-3), arg(5, 7u64));
    let window = 20;

    let corpus = sequence_dependent_corpus(seed, n_events, lag);
    let recs = corpus
        .recordings
        .iter()
        .map(|g| normalize_direction(&g.recording))
        .collect::<Result<Vec<_>, _>>()?;
    let mut events = Vec::new();
    for r in &recs {
        events.extend(detect_cut_ins(r, &DetectorConfig::default())?.into_iter().map(|e| (e, r)));
    }
    let split = build_dataset(&events, window, DistanceMode::ToCutInPoint, 0.8, seed)?;
    println!("{} events, {} train / {} test windows", events.len(), split.train.len(), split.test.len());

    let cfg = TrainConfig {
        learning_rate: lr,
        max_epochs: 150,
        seed,
        ..TrainConfig::default()
    };
    let mut lstm = LstmNet::new(LstmNetConfig::uniform(width, window))?;
    let t = train(&mut lstm, &split, &cfg)?;
    println!("lstm: {} epochs, best val {:.4}", t.epochs.len(), t.best_val_rmse);
    let mut ann = AnnNet::new(AnnConfig::uniform(width, window))?;
    let t = train(&mut ann, &split, &cfg)?;
    println!("ann:  {} epochs, best val {:.4}", t.epochs.len(), t.best_val_rmse);

    let models = [
        ("lstm", Model::Lstm(lstm)),
        ("ann", Model::Ann(ann)),
        ("mpc", Model::Mpc(MpcController::new(MpcConfig::default())?)),
    ];
    let pairs: Vec<_> = models.iter().map(|(n, m)| (*n, m)).collect();
    let report = evaluate_models(&pairs, &split.test, &split.stats)?;

    // target frame offset from the cut-in, in buckets of 10
    let mut buckets: BTreeMap<(i64, &str), (f64, usize)> = BTreeMap::new();
    for r in &report.residuals {
        let b = buckets
            .entry(((r.offset + window as i64).div_euclid(10) * 10, r.model.as_str()))
            .or_default();
        b.0 += (r.measured - r.predicted).powi(2);
        b.1 += 1;
    }
    println!("\n{:>7} {:>8} {:>8} {:>8}", "offset", "lstm", "ann", "mpc");
    let offsets: Vec<i64> = buckets.keys().map(|k| k.0).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
    for o in offsets {
        let cell = |m| buckets.get(&(o, m)).map_or(f64::NAN, |(s, n)| (s / *n as f64).sqrt());
        println!("{o:>7} {:>8.3} {:>8.3} {:>8.3}", cell("lstm"), cell("ann"), cell("mpc"));
    }
    println!();
    for s in &report.scores {
        println!("{:<5} rmse {:.4} m/s2, accuracy {:.2}%", s.model, s.rmse, s.accuracy_pct);
    }
    Ok(())
}
