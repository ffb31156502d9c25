//! Every CLI stage in order through the library API.
//!
//!     cargo run --release --example run_pipeline [out_dir] [config.toml]

use std::path::PathBuf;

use cutin_acc::pipeline::{run_stage, RunConfig, Stage};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "run".into()));
    let mut cfg = match args.next() {
        Some(path) => RunConfig::load(path.as_ref())?,
        None => {
            let mut cfg = RunConfig::default();
            cfg.model.width = 16;
            cfg.train.learning_rate = 1e-3;
            cfg.train.max_epochs = 10;
            cfg
        }
    };
    cfg.paths.out = out;
    for stage in Stage::ALL {
        run_stage(stage, &cfg)?;
    }
    print!("{}", std::fs::read_to_string(cfg.paths.out.join("report/summary.txt"))?);
    Ok(())
}
