//! Replay a planted cut-in with the SV under closed-loop control.
//!
//!     cargo run --example simulate_cut_in [seed] [sim.csv]

use std::fs::File;

use cutin_acc::dataset::FeatureRow;
use cutin_acc::detect::{detect_cut_ins, DetectorConfig};
use cutin_acc::evaluation::{simulate_cut_in, write_sim, ConstantController, Controller, EvalError, Playback, SimConfig};
use cutin_acc::ingest::normalize_direction;
use cutin_acc::predictors::{mpc_predict, MpcConfig, MpcState};
use cutin_acc::synth::{generate, ScenarioScript};

/// MPC fed from the newest row.
struct Mpc(MpcConfig);

impl Controller for Mpc {
    fn window(&self) -> usize {
        1
    }
    fn command(&mut self, rows: &[FeatureRow]) -> Result<f64, EvalError> {
        let r = rows.last().ok_or(EvalError::Empty)?;
        let s = MpcState::from_row(r);
        mpc_predict(&s, &self.0).map_err(EvalError::from)
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map_or(Ok(0), |s| s.parse())?;
    let out = args.next();

    let rec = normalize_direction(&generate(&ScenarioScript::planted_cut_ins(seed, 1))?.recording)?;
    let event = detect_cut_ins(&rec, &DetectorConfig::default())?
        .into_iter()
        .next()
        .ok_or("no cut-in detected")?;
    let playback = Playback::from_event(&event, &rec, 19, Default::default())?;
    let cfg = SimConfig::default();

    let coast = simulate_cut_in(&playback, &mut ConstantController(0.0), &cfg)?;
    println!("coasting: min gap {:.2} m, collision {}", coast.min_gap, coast.collision);
    let mpc = simulate_cut_in(&playback, &mut Mpc(MpcConfig::default()), &cfg)?;
    println!("mpc:      min gap {:.2} m, collision {}", mpc.min_gap, mpc.collision);
    println!("{:>6} {:>7} {:>7} {:>7} {:>7}", "t", "v_sv", "v_pv", "a_sv", "gap");
    for k in (0..mpc.t.len()).step_by(5) {
        println!(
            "{:>6.2} {:>7.2} {:>7.2} {:>7.2} {:>7.2}",
            mpc.t[k], mpc.v_sv[k], mpc.v_pv[k], mpc.a_sv[k], mpc.gap[k]
        );
    }
    if let Some(path) = out {
        write_sim(&mpc, File::create(&path)?)?;
        println!("wrote {path}");
    }
    Ok(())
}
