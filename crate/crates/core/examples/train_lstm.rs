//! Fit the LSTM predictor on a linear synthetic corpus and save a checkpoint.
//!
//!     cargo run --release --example train_lstm [width] [lr] [out.ckpt]

use std::fs::File;
use std::io::BufWriter;

use cutin_acc::predictors::{fit, normalized_rmse, LstmNet, LstmNetConfig, Model, TrainConfig};
use cutin_acc::synth::linear_corpus;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let mut args = std::env::args().skip(1);
    let width: usize = args.next().map_or(Ok(32), |s| s.parse())?;
    let lr: f64 = args.next().map_or(Ok(1e-3), |s| s.parse())?;
    let out = args.next();

    let window = 20;
    let train = linear_corpus(1, 100, 10, window, 0.01);
    let val = linear_corpus(2, 20, 10, window, 0.01);
    let cfg = TrainConfig {
        learning_rate: lr,
        max_epochs: 20,
        ..TrainConfig::default()
    };
    let mut net = LstmNet::new(LstmNetConfig::uniform(width, window))?;
    let trace = fit(&mut net, &train, &cfg, |m, _| normalized_rmse(m, &val))?;
    for e in &trace.epochs {
        println!("epoch {:>3}  train {:.4}  val {:.4}", e.epoch, e.train_rmse, e.val_rmse);
    }
    println!(
        "{:?} after {} iterations; best val {:.4} at epoch {}",
        trace.stop_reason,
        trace.iterations.len(),
        trace.best_val_rmse,
        trace.best_epoch
    );
    if let Some(path) = out {
        Model::Lstm(net).save(BufWriter::new(File::create(&path)?))?;
        println!("saved {path}");
    }
    Ok(())
}
