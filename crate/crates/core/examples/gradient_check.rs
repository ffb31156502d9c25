//! Backprop through the full LSTM and ANN predictors against central differences.
//!
//!     cargo run --example gradient_check [width] [window]

use cutin_acc::neural::gradient_check;
use cutin_acc::predictors::{AnnConfig, AnnNet, LstmNet, LstmNetConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let width: usize = args.next().map_or(Ok(4), |s| s.parse())?;
    let window: usize = args.next().map_or(Ok(6), |s| s.parse())?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let input: Vec<[f64; 5]> = (0..window)
        .map(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0)))
        .collect();
    let target = 0.3;

    let mut lstm = LstmNet::seeded(LstmNetConfig::uniform(width, window), 7)?;
    println!("lstm layers: {:?}", lstm.config.layer_kinds());
    let r = gradient_check(&mut lstm, &input, &target, 1e-6)?;
    println!("lstm: {} entries, max rel error {:.2e} at {:?}", r.checked, r.max_relative_error, r.worst);

    let mut ann = AnnNet::seeded(AnnConfig::uniform(width, window), 7)?;
    let r = gradient_check(&mut ann, &input, &target, 1e-6)?;
    println!("ann:  {} entries, max rel error {:.2e} at {:?}", r.checked, r.max_relative_error, r.worst);
    Ok(())
}
