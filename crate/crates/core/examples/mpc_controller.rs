//! The closed-form constant-acceleration MPC baseline on a few states.
//!
//!     cargo run --example mpc_controller

use cutin_acc::predictors::{mpc_predict, MpcConfig, MpcState};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = MpcConfig::default();
    println!("{cfg:?}");
    println!("{:>7} {:>6} {:>6} {:>8} {:>9}", "gap", "v_sv", "v_pv", "a", "cost");
    for (gap, v_sv, v_pv) in [
        (37.5, 25.0, 25.0),
        (20.0, 25.0, 25.0),
        (10.0, 28.0, 24.0),
        (5.0, 30.0, 25.0),
        (60.0, 22.0, 26.0),
        (30.0, 0.0, 5.0),
    ] {
        let s = MpcState { gap, v_sv, v_pv };
        let a = mpc_predict(&s, &cfg)?;
        println!("{gap:>7.1} {v_sv:>6.1} {v_pv:>6.1} {a:>8.3} {:>9.1}", cfg.cost(&s, a));
    }
    Ok(())
}
