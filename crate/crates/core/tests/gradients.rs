//! Analytic gradients against central finite differences.

use cutin_acc::dataset::Features;
use cutin_acc::neural::{
    gradient_check, half_mse_grad, half_mse_loss, relu_backward, relu_forward, Differentiable,
    FcLayer, LstmLayer, NeuralError, Param, Parameterized,
};
use cutin_acc::predictors::{AnnConfig, AnnNet, LstmNet, LstmNetConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-6;

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Nudge every bias off zero so no ReLU input sits exactly on the kink,
/// where central differences are meaningless.
fn jitter_biases<M: Parameterized>(model: &mut M, rng: &mut ChaCha8Rng) {
    for p in model.params_mut() {
        if p.name.ends_with("bias") || p.name.contains(".b_") {
            for v in p.value.data_mut() {
                *v += rng.random_range(-0.3..0.3);
            }
        }
    }
}

fn random_window(rng: &mut ChaCha8Rng, t: usize) -> Vec<Features> {
    (0..t)
        .map(|_| std::array::from_fn(|_| rng.random_range(-1.5..1.5)))
        .collect()
}

/// FC layer followed by half-MSE.
struct FcProbe(FcLayer);

impl Parameterized for FcProbe {
    fn params(&self) -> Vec<&Param> {
        self.0.params()
    }
    fn params_mut(&mut self) -> Vec<&mut Param> {
        self.0.params_mut()
    }
}

impl Differentiable for FcProbe {
    type Input = [f64];
    type Target = [f64];
    fn loss(&self, x: &[f64], t: &[f64]) -> Result<f64, NeuralError> {
        half_mse_loss(&self.0.forward(x)?, t)
    }
    fn backprop(&mut self, x: &[f64], t: &[f64]) -> Result<f64, NeuralError> {
        let y = self.0.forward(x)?;
        self.0.backward(x, &half_mse_grad(&y, t)?)?;
        half_mse_loss(&y, t)
    }
}

/// FC → ReLU → half-MSE, with the input itself as a parameter so the ReLU
/// input gradient is exercised.
struct ReluProbe {
    fc: FcLayer,
    x: Param,
}

impl Parameterized for ReluProbe {
    fn params(&self) -> Vec<&Param> {
        let mut p = self.fc.params();
        p.push(&self.x);
        p
    }
    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p = self.fc.params_mut();
        p.push(&mut self.x);
        p
    }
}

impl Differentiable for ReluProbe {
    type Input = ();
    type Target = [f64];
    fn loss(&self, _: &(), t: &[f64]) -> Result<f64, NeuralError> {
        let a = relu_forward(self.x.value.data());
        half_mse_loss(&self.fc.forward(&a)?, t)
    }
    fn backprop(&mut self, _: &(), t: &[f64]) -> Result<f64, NeuralError> {
        let x = self.x.value.data().to_vec();
        let a = relu_forward(&x);
        let y = self.fc.forward(&a)?;
        let da = self.fc.backward(&a, &half_mse_grad(&y, t)?)?;
        let dx = relu_backward(&x, &da);
        for (g, d) in self.x.grad.data_mut().iter_mut().zip(dx) {
            *g += d;
        }
        half_mse_loss(&y, t)
    }
}

/// LSTM over a sequence with loss `Σ_t <r_t, h_t>`, plus trainable h0 and c0.
struct LstmProbe {
    cell: LstmLayer,
    h0: Param,
    c0: Param,
    readout: Vec<Vec<f64>>,
}

impl Parameterized for LstmProbe {
    fn params(&self) -> Vec<&Param> {
        let mut p = self.cell.params();
        p.push(&self.h0);
        p.push(&self.c0);
        p
    }
    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p = self.cell.params_mut();
        p.push(&mut self.h0);
        p.push(&mut self.c0);
        p
    }
}

impl Differentiable for LstmProbe {
    type Input = [Vec<f64>];
    type Target = ();
    fn loss(&self, xs: &[Vec<f64>], _: &()) -> Result<f64, NeuralError> {
        let steps = self
            .cell
            .forward_sequence(xs, self.h0.value.data(), self.c0.value.data())?;
        Ok(steps
            .iter()
            .zip(&self.readout)
            .map(|(s, r)| s.h.iter().zip(r).map(|(h, r)| h * r).sum::<f64>())
            .sum())
    }
    fn backprop(&mut self, xs: &[Vec<f64>], t: &()) -> Result<f64, NeuralError> {
        let steps = self
            .cell
            .forward_sequence(xs, self.h0.value.data(), self.c0.value.data())?;
        let (_, dh0, dc0) = self.cell.backward_sequence(&steps, &self.readout.clone())?;
        for (g, d) in self.h0.grad.data_mut().iter_mut().zip(dh0) {
            *g += d;
        }
        for (g, d) in self.c0.grad.data_mut().iter_mut().zip(dc0) {
            *g += d;
        }
        self.loss(xs, t)
    }
}

fn lstm_probe(seed: u64, input: usize, hidden: usize, t: usize) -> (LstmProbe, Vec<Vec<f64>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cell = LstmLayer::glorot("lstm", input, hidden, &mut rng);
    for b in cell.b.iter_mut() {
        for v in b.value.data_mut() {
            *v += rng.random_range(-0.5..0.5);
        }
    }
    let mut h0 = Param::zeros("h0", hidden, 1);
    let mut c0 = Param::zeros("c0", hidden, 1);
    h0.value.data_mut().copy_from_slice(&random_vec(&mut rng, hidden));
    c0.value.data_mut().copy_from_slice(&random_vec(&mut rng, hidden));
    let readout = (0..t).map(|_| random_vec(&mut rng, hidden)).collect();
    let xs = (0..t).map(|_| random_vec(&mut rng, input)).collect();
    (LstmProbe { cell, h0, c0, readout }, xs)
}

#[test]
fn fc_layer_matches_finite_differences() {
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut probe = FcProbe(FcLayer::glorot("fc", 4, 3, &mut rng));
        for v in probe.0.bias.value.data_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
        let x = random_vec(&mut rng, 4);
        let t = random_vec(&mut rng, 3);
        let r = gradient_check(&mut probe, &x, &t, H).unwrap();
        assert!(r.max_relative_error < 1e-6, "seed {seed}: {r:?}");
    }
}

#[test]
fn relu_matches_finite_differences_away_from_zero() {
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fc = FcLayer::glorot("fc", 5, 2, &mut rng);
        let mut x = Param::zeros("x", 5, 1);
        for v in x.value.data_mut() {
            let m: f64 = rng.random_range(0.1..1.0);
            *v = if rng.random_bool(0.5) { m } else { -m };
        }
        let mut probe = ReluProbe { fc, x };
        let t = random_vec(&mut rng, 2);
        let r = gradient_check(&mut probe, &(), &t, H).unwrap();
        assert!(r.max_relative_error < 1e-6, "seed {seed}: {r:?}");
    }
}

#[test]
fn lstm_bptt_matches_finite_differences() {
    for seed in 0..20 {
        let (mut probe, xs) = lstm_probe(seed, 3, 4, 5);
        let r = gradient_check(&mut probe, &xs, &(), H).unwrap();
        assert!(r.max_relative_error < 1e-5, "seed {seed}: {r:?}");
    }
}

#[test]
fn lstm_sequence_hidden4_t6() {
    for seed in 100..120 {
        let (mut probe, xs) = lstm_probe(seed, 5, 4, 6);
        let r = gradient_check(&mut probe, &xs, &(), H).unwrap();
        assert!(r.max_relative_error < 1e-5, "seed {seed}: {r:?}");
    }
}

#[test]
fn half_mse_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let p = random_vec(&mut rng, 6);
        let t = random_vec(&mut rng, 6);
        let g = half_mse_grad(&p, &t).unwrap();
        for k in 0..6 {
            // quadratic loss: central differences carry no truncation error
            let h = 1e-3;
            let (mut plus, mut minus) = (p.clone(), p.clone());
            plus[k] += h;
            minus[k] -= h;
            let n = (half_mse_loss(&plus, &t).unwrap() - half_mse_loss(&minus, &t).unwrap()) / (2.0 * h);
            let err = (g[k] - n).abs() / g[k].abs().max(n.abs()).max(1e-7);
            assert!(err < 1e-8, "{err}");
        }
    }
}

#[test]
fn full_lstm_network_matches_finite_differences() {
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let mut net = LstmNet::seeded(LstmNetConfig::uniform(4, 6), seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        jitter_biases(&mut net, &mut rng);
        let window = random_window(&mut rng, 6);
        let target: f64 = rng.random_range(-1.0..1.0);
        let r = gradient_check(&mut net, &window, &target, H).unwrap();
        worst = worst.max(r.max_relative_error);
        assert!(r.max_relative_error < 1e-4, "seed {seed}: {r:?}");
    }
    eprintln!("lstm network worst relative error {worst:e}");
}

#[test]
fn full_ann_matches_finite_differences() {
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let mut net = AnnNet::seeded(AnnConfig::uniform(4, 6), seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2000 + seed);
        jitter_biases(&mut net, &mut rng);
        let window = random_window(&mut rng, 6);
        let target: f64 = rng.random_range(-1.0..1.0);
        let r = gradient_check(&mut net, &window, &target, H).unwrap();
        worst = worst.max(r.max_relative_error);
        assert!(r.max_relative_error < 1e-4, "seed {seed}: {r:?}");
    }
    eprintln!("ann worst relative error {worst:e}");
}

#[test]
fn linear_model_is_nearly_exact() {
    let mut probe = FcProbe(FcLayer::zeros("fc", 2, 1));
    probe.0.weight.value.data_mut().copy_from_slice(&[0.5, -0.25]);
    let r = gradient_check(&mut probe, &[2.0, 4.0], &[1.0], 1e-3).unwrap();
    assert!(r.max_relative_error < 1e-8, "{r:?}");
}

#[test]
fn zero_parameter_model_reports_zero_error() {
    let mut probe = FcProbe(FcLayer::zeros("fc", 3, 2));
    let r = gradient_check(&mut probe, &[0.0, 0.0, 0.0], &[0.0, 0.0], H).unwrap();
    assert_eq!(r.max_relative_error, 0.0);
    assert_eq!(r.checked, 8);
}
