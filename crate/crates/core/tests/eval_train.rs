//! Metrics, closed-loop simulation and the training loop.

use cutin_acc::dataset::{
    build_dataset, DistanceMode, FeatureRow, NormalizationStats, SequenceSample, FEATURE_COUNT,
};
use cutin_acc::detect::{detect_cut_ins, DetectorConfig, EventKey};
use cutin_acc::evaluation::{
    accuracy_pct, evaluate_models, mean, rmse, simulate_cut_in, ConstantController, Controller, EvalError, Playback,
    SimConfig,
};
use cutin_acc::ingest::normalize_direction;
use cutin_acc::neural::{half_mse_grad, half_mse_loss, Parameterized, Tensor2};
use cutin_acc::predictors::{
    fit, mpc_predict, AnnConfig, AnnNet, Model, MpcConfig, MpcController, MpcState, SequenceRegressor, StopReason,
    TrainConfig,
};
use cutin_acc::synth::{generate, linear_corpus, ScenarioScript};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + b.abs())
}

fn two_pass_rmse(m: &[f64], p: &[f64]) -> f64 {
    let mut sq = Vec::with_capacity(m.len());
    for i in 0..m.len() {
        sq.push((m[i] - p[i]) * (m[i] - p[i]));
    }
    let mut total = 0.0;
    for s in &sq {
        total += s;
    }
    (total / m.len() as f64).sqrt()
}

#[test]
fn rmse_hand_case() {
    assert_eq!(rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 12.5f64.sqrt());
    assert_eq!(rmse(&[1.5], &[1.5]).unwrap(), 0.0);
    assert!(matches!(rmse(&[1.0], &[1.0, 2.0]), Err(EvalError::LengthMismatch { .. })));
    assert!(matches!(rmse(&[], &[]), Err(EvalError::Empty)));
}

#[test]
fn rmse_matches_oracle_and_is_symmetric() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..200 {
        let n = rng.random_range(1..300);
        let m: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..3.0)).collect();
        let p: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..3.0)).collect();
        let r = rmse(&m, &p).unwrap();
        assert!(close(r, two_pass_rmse(&m, &p), 1e-12));
        assert!(close(rmse(&p, &m).unwrap(), r, 1e-12));
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng);
        let mp: Vec<f64> = idx.iter().map(|&i| m[i]).collect();
        let pp: Vec<f64> = idx.iter().map(|&i| p[i]).collect();
        assert!(close(rmse(&mp, &pp).unwrap(), r, 1e-12));
    }
}

#[test]
fn predicting_the_mean_gives_the_std() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let m: Vec<f64> = (0..500).map(|_| rng.random_range(-4.0..2.0)).collect();
    let mu = mean(&m).unwrap();
    let std = (m.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / m.len() as f64).sqrt();
    assert!(close(rmse(&m, &vec![mu; m.len()]).unwrap(), std, 1e-12));
}

#[test]
fn accuracy_is_affine_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..100 {
        let n = rng.random_range(2..100);
        let m: Vec<f64> = (0..n).map(|_| rng.random_range(-4.0..2.0)).collect();
        let p: Vec<f64> = m.iter().map(|v| v + rng.random_range(-0.5..0.5)).collect();
        let base = accuracy_pct(&m, &p).unwrap();
        assert!((0.0..=100.0).contains(&base));
        let scale: f64 = rng.random_range(0.1..10.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let shift = rng.random_range(-100.0..100.0);
        let f = |v: &f64| scale * v + shift;
        let moved = accuracy_pct(&m.iter().map(f).collect::<Vec<_>>(), &p.iter().map(f).collect::<Vec<_>>()).unwrap();
        assert!((moved - base).abs() < 1e-9, "{moved} vs {base}");
    }
    assert_eq!(accuracy_pct(&[0.0, 1.0], &[0.0, 1.0]).unwrap(), 100.0);
    assert_eq!(accuracy_pct(&[0.0, 1.0], &[5.0, -5.0]).unwrap(), 0.0);
    assert!(matches!(accuracy_pct(&[1.0, 1.0], &[1.0, 1.0]), Err(EvalError::DegenerateRange)));
}

/// Normalized test side of a planted-cut-in dataset with window 4.
fn test_samples(seed: u64, events: usize) -> (Vec<SequenceSample>, NormalizationStats) {
    let rec = normalize_direction(&generate(&ScenarioScript::planted_cut_ins(seed, events)).unwrap().recording).unwrap();
    let found = detect_cut_ins(&rec, &DetectorConfig::default()).unwrap();
    let pairs: Vec<_> = found.iter().map(|e| (*e, &rec)).collect();
    let split = build_dataset(&pairs, 4, DistanceMode::ToCutInPoint, 0.5, seed).unwrap();
    (split.test, split.stats)
}

#[test]
fn evaluation_does_not_depend_on_model_or_sample_order() {
    let (mut test, stats) = test_samples(3, 4);
    let ann = Model::Ann(AnnNet::seeded(AnnConfig::uniform(6, 4), 1).unwrap());
    let twin = ann.clone();
    let mpc = Model::Mpc(MpcController::new(MpcConfig::default()).unwrap());

    let a = evaluate_models(&[("ann", &ann), ("mpc", &mpc), ("twin", &twin)], &test, &stats).unwrap();
    let ann_rows: Vec<_> = a.residuals.iter().filter(|r| r.model == "ann").collect();
    let twin_rows: Vec<_> = a.residuals.iter().filter(|r| r.model == "twin").collect();
    assert_eq!(ann_rows.len(), test.len());
    for (x, y) in ann_rows.iter().zip(&twin_rows) {
        assert_eq!((x.sample, x.measured, x.predicted), (y.sample, y.measured, y.predicted));
    }
    assert_eq!(a.score("ann").unwrap().rmse, a.score("twin").unwrap().rmse);

    let b = evaluate_models(&[("mpc", &mpc), ("ann", &ann)], &test, &stats).unwrap();
    for name in ["ann", "mpc"] {
        assert_eq!(a.score(name).unwrap(), b.score(name).unwrap());
    }

    test.shuffle(&mut ChaCha8Rng::seed_from_u64(0));
    let c = evaluate_models(&[("ann", &ann), ("mpc", &mpc)], &test, &stats).unwrap();
    for name in ["ann", "mpc"] {
        assert!(close(c.score(name).unwrap().rmse, a.score(name).unwrap().rmse, 1e-12));
    }
    assert!(matches!(evaluate_models(&[("ann", &ann)], &[], &stats), Err(EvalError::Empty)));
}

fn planted_playback(seed: u64, warmup: usize) -> Playback {
    let rec = normalize_direction(&generate(&ScenarioScript::planted_cut_ins(seed, 1)).unwrap().recording).unwrap();
    let events = detect_cut_ins(&rec, &DetectorConfig::default()).unwrap();
    Playback::from_event(&events[0], &rec, warmup, Default::default()).unwrap()
}

fn check_kinematics(r: &cutin_acc::evaluation::SimResult, cfg: &SimConfig) {
    for k in 0..r.x_sv.len() - 1 {
        assert!((r.x_sv[k + 1] - r.x_sv[k] - r.v_sv[k + 1] * cfg.dt).abs() < 1e-9);
        assert!(r.x_sv[k + 1] >= r.x_sv[k]);
        assert!(r.v_sv[k + 1] >= 0.0);
        assert!((cfg.a_min..=cfg.a_max).contains(&r.a_sv[k]));
    }
}

#[test]
fn simulation_kinematics_hold() {
    let cfg = SimConfig::default();
    let playback = planted_playback(5, 19);
    for a in [-6.0, -1.0, 0.0, 0.5] {
        let r = simulate_cut_in(&playback, &mut ConstantController(a), &cfg).unwrap();
        check_kinematics(&r, &cfg);
        if !r.collision {
            assert_eq!(r.x_sv.len(), playback.pv.len());
        }
        assert_eq!(r.a_commanded[0], a);
    }
    let hard = simulate_cut_in(&playback, &mut ConstantController(-6.0), &cfg).unwrap();
    for k in 0..hard.v_sv.len() - 1 {
        let expect = (hard.v_sv[k] + cfg.a_min * cfg.dt).max(0.0);
        assert!((hard.v_sv[k + 1] - expect).abs() < 1e-12);
    }
}

#[test]
fn full_throttle_collides_and_stops() {
    let cfg = SimConfig {
        a_max: 8.0,
        ..SimConfig::default()
    };
    let playback = planted_playback(6, 19);
    let r = simulate_cut_in(&playback, &mut ConstantController(8.0), &cfg).unwrap();
    assert!(r.collision);
    assert!(*r.gap.last().unwrap() <= 0.0);
    assert!(r.gap[..r.gap.len() - 1].iter().all(|&g| g > 0.0));
    assert_eq!(r.min_gap, *r.gap.last().unwrap());
    check_kinematics(&r, &cfg);
}

/// MPC evaluated straight from the newest raw row.
struct RawMpc(MpcConfig);

impl Controller for RawMpc {
    fn window(&self) -> usize {
        1
    }
    fn command(&mut self, rows: &[FeatureRow]) -> Result<f64, EvalError> {
        let r = rows.last().unwrap();
        Ok(mpc_predict(&MpcState { gap: r.x_pv - r.x_sv, v_sv: r.v_sv, v_pv: r.v_pv }, &self.0).unwrap())
    }
}

#[test]
fn mpc_avoids_planted_collisions() {
    let cfg = SimConfig::default();
    for seed in 0..20 {
        let playback = planted_playback(seed, 19);
        let r = simulate_cut_in(&playback, &mut RawMpc(MpcConfig::default()), &cfg).unwrap();
        assert!(!r.collision, "seed {seed}: min gap {}", r.min_gap);
        check_kinematics(&r, &cfg);
    }
}

#[test]
fn short_history_is_rejected() {
    let playback = planted_playback(1, 3);
    struct Wide;
    impl Controller for Wide {
        fn window(&self) -> usize {
            20
        }
        fn command(&mut self, _: &[FeatureRow]) -> Result<f64, EvalError> {
            Ok(0.0)
        }
    }
    assert!(matches!(
        simulate_cut_in(&playback, &mut Wide, &SimConfig::default()),
        Err(EvalError::WindowUnderflow { needed: 20, available: 4 })
    ));
}

#[test]
fn half_mse_hand_case() {
    assert_eq!(half_mse_loss(&[2.0], &[0.0]).unwrap(), 2.0);
    assert_eq!(half_mse_grad(&[2.0], &[0.0]).unwrap(), vec![2.0]);
    assert_eq!(half_mse_loss(&[1.0, 3.0], &[0.0, 0.0]).unwrap(), 2.5);
}

#[test]
fn ann_forward_matches_manual_recomputation() {
    let net = AnnNet::seeded(AnnConfig::uniform(3, 2), 11).unwrap();
    let window = vec![[0.3, -1.2, 0.8, 2.0, -0.1], [1.1, 0.4, -0.6, 0.0, 0.9]];
    let mut a: Vec<f64> = window.iter().flatten().copied().collect();
    let affine = |w: &Tensor2, b: &Tensor2, x: &[f64]| -> Vec<f64> {
        (0..w.rows())
            .map(|r| b.data()[r] + w.row(r).iter().zip(x).map(|(p, q)| p * q).sum::<f64>())
            .collect()
    };
    for layer in &net.hidden.layers {
        a = affine(&layer.weight.value, &layer.bias.value, &a)
            .into_iter()
            .map(|v| v.max(0.0))
            .collect();
    }
    let y = affine(&net.head.weight.value, &net.head.bias.value, &a)[0];
    assert!((net.forward(&window).unwrap() - y).abs() < 1e-12);
    assert_eq!(net.hidden.layers.len(), 5);
    assert_eq!(net.hidden.layers[0].weight.value.shape(), (3, 2 * FEATURE_COUNT));
}

fn small_train() -> Vec<SequenceSample> {
    linear_corpus(2, 20, 10, 3, 0.05)
}

fn small_cfg(seed: u64) -> TrainConfig {
    TrainConfig {
        learning_rate: 1e-3,
        max_epochs: 4,
        batch_size: 16,
        seed,
        ..TrainConfig::default()
    }
}

#[test]
fn training_is_reproducible() {
    let train = small_train();
    let run = |seed| {
        let mut net = AnnNet::new(AnnConfig::uniform(8, 3)).unwrap();
        let trace = fit(&mut net, &train, &small_cfg(seed), |m, _| {
            cutin_acc::predictors::normalized_rmse(m, &train[..50])
        })
        .unwrap();
        (trace, net.snapshot())
    };
    let (t1, p1) = run(3);
    let (t2, p2) = run(3);
    assert_eq!(t1, t2);
    assert_eq!(p1, p2);
    let (t3, _) = run(4);
    assert_ne!(t1.iterations, t3.iterations);
    assert_eq!(t1.iterations.len(), 4 * 200usize.div_ceil(16));
}

#[test]
fn injected_validation_drives_stopping_and_restore() {
    let train = small_train();
    let scores = [1.0, 0.9, 0.95, 0.96, 0.97, 0.98, 0.99, 0.5];
    let mut net = AnnNet::new(AnnConfig::uniform(8, 3)).unwrap();
    let mut at_best = Vec::new();
    let mut seen = Vec::new();
    let cfg = TrainConfig {
        max_epochs: 50,
        ..small_cfg(0)
    };
    let trace = fit(&mut net, &train, &cfg, |m, epoch| {
        seen.push(epoch);
        if epoch == 2 {
            at_best = m.snapshot();
        }
        Ok(scores[epoch - 1])
    })
    .unwrap();
    assert_eq!(seen, (1..=7).collect::<Vec<_>>());
    assert_eq!(trace.stop_reason, StopReason::Patience);
    assert_eq!((trace.best_epoch, trace.best_val_rmse), (2, 0.9));
    assert_eq!(trace.epochs.len(), 7);
    assert_eq!(net.snapshot(), at_best);
}

#[test]
fn constant_target_is_learned() {
    let mut train = small_train();
    for s in &mut train {
        s.target = 0.7;
    }
    let mut net = AnnNet::new(AnnConfig::uniform(8, 3)).unwrap();
    let cfg = TrainConfig {
        learning_rate: 1e-2,
        max_epochs: 30,
        ..small_cfg(1)
    };
    let trace = fit(&mut net, &train, &cfg, |m, _| cutin_acc::predictors::normalized_rmse(m, &train)).unwrap();
    assert!(trace.best_val_rmse < 0.05, "{}", trace.best_val_rmse);
    assert!((net.forward(&train[0].inputs).unwrap() - 0.7).abs() < 0.05);
}

#[test]
fn residual_rows_carry_event_keys() {
    let (test, stats) = test_samples(5, 2);
    let mpc = Model::Mpc(MpcController::new(MpcConfig::default()).unwrap());
    let report = evaluate_models(&[("mpc", &mpc)], &test, &stats).unwrap();
    for (r, s) in report.residuals.iter().zip(&test) {
        let k: EventKey = s.event;
        assert_eq!(r.event, k);
        assert_eq!(r.offset, s.offset);
        assert!(close(r.measured, stats.denormalize_target(s.target), 1e-12));
    }
}
