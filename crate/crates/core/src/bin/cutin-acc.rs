use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::LazyLock;

use clap::{Parser, Subcommand};
use cutin_acc::pipeline::{run_stage, Overrides, RunConfig, Stage};

static DEFAULTS: LazyLock<String> = LazyLock::new(|| {
    format!(
        "Every stage reads and writes files under --out. Default configuration \
         (any subset may be given in --config):\n\n{}",
        RunConfig::default().to_toml()
    )
});

/// Cut-in detection, acceleration predictors and ACC simulation.
#[derive(Parser)]
#[command(version, after_long_help = DEFAULTS.as_str())]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory [default: run].
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Directory of `<id>_tracks.csv` recordings [default: <out>/recordings].
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    /// Frames per input window [default: 20].
    #[arg(long, global = true)]
    window_length: Option<usize>,
    /// Training share of windows [default: 0.8].
    #[arg(long, global = true)]
    ratio: Option<f64>,
    /// Adam learning rate [default: 0.0001].
    #[arg(long, global = true)]
    lr: Option<f64>,
    /// Epochs without validation improvement before stopping [default: 5].
    #[arg(long, global = true)]
    patience: Option<usize>,
    #[arg(long, global = true)]
    max_epochs: Option<usize>,
    /// Cut-in time headway threshold in seconds [default: 2.0].
    #[arg(long, global = true)]
    headway: Option<f64>,
    /// SV deceleration threshold in m/s² [default: -0.5].
    #[arg(long, global = true, allow_negative_numbers = true)]
    min_decel: Option<f64>,
    /// Comma-separated trainable models [default: lstm,ann].
    #[arg(long, global = true, value_delimiter = ',')]
    model: Option<Vec<String>>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Generate synthetic recordings with planted cut-ins.
    Synth,
    /// Parse and direction-normalize recordings.
    Ingest,
    /// Find aggressive cut-ins.
    Detect,
    /// Window, split and normalize the events.
    BuildDataset,
    /// Fit the LSTM and ANN predictors.
    Train,
    /// Score all predictors on the test side.
    Evaluate,
    /// Closed-loop replay of one cut-in.
    Simulate,
    /// Collate metrics, traces and the simulation into report tables.
    Report,
}

impl Command {
    fn stage(self) -> Stage {
        match self {
            Command::Synth => Stage::Synth,
            Command::Ingest => Stage::Ingest,
            Command::Detect => Stage::Detect,
            Command::BuildDataset => Stage::BuildDataset,
            Command::Train => Stage::Train,
            Command::Evaluate => Stage::Evaluate,
            Command::Simulate => Stage::Simulate,
            Command::Report => Stage::Report,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = cli
        .config
        .as_deref()
        .map_or_else(|| Ok(RunConfig::default()), RunConfig::load)
        .and_then(|mut cfg| {
            cfg.apply(&Overrides {
                seed: cli.seed,
                out: cli.out.clone(),
                input: cli.input.clone(),
                window_length: cli.window_length,
                ratio: cli.ratio,
                lr: cli.lr,
                patience: cli.patience,
                max_epochs: cli.max_epochs,
                headway: cli.headway,
                min_decel: cli.min_decel,
                models: cli.model.clone(),
            });
            run_stage(cli.command.stage(), &cfg)
        });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
