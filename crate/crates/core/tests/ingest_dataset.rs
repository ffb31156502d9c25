//! Ingest round trips and dataset windowing, splitting and normalization.

use std::collections::BTreeSet;

use cutin_acc::dataset::{
    build_dataset, denormalize, normalize, split_dataset, window_rows, DistanceMode, EventRows, FeatureRow,
    NormalizationStats, SequenceSample, EVENT_ROWS,
};
use cutin_acc::detect::{detect_cut_ins, DetectorConfig, EventKey};
use cutin_acc::ingest::{
    mirror_track, normalize_direction, parse_tracks_with, write_tracks, ColumnMap, RecordingMeta,
};
use cutin_acc::synth::{generate, ScenarioScript};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn write_then_parse_is_identity_on_100_recordings() {
    for seed in 0..100 {
        let script = ScenarioScript::random(seed, 1 + (seed % 10) as usize, 90 + (seed as i64 % 5) * 40);
        let rec = generate(&script).unwrap().recording;
        let mut buf = Vec::new();
        write_tracks(&rec, &mut buf).unwrap();
        let meta = RecordingMeta {
            lane_count: Some(rec.lane_count),
            ..RecordingMeta::new(rec.recording_id)
        };
        let meta = RecordingMeta::parse(&meta.to_text()).unwrap();
        let back = parse_tracks_with(buf.as_slice(), &meta, &ColumnMap::default()).unwrap();
        assert_eq!(back, rec, "seed {seed}");
    }
}

#[test]
fn normalization_makes_every_track_increasing() {
    for seed in 0..30 {
        let mut script = ScenarioScript::random(seed, 8, 200);
        script.decreasing = seed % 2 == 0;
        let rec = normalize_direction(&generate(&script).unwrap().recording).unwrap();
        for t in rec.tracks.values() {
            assert!(t.median_x_velocity() > 0.0);
            assert_eq!(t.mirrored, script.decreasing);
        }
    }
}

proptest! {
    #[test]
    fn mirroring_twice_restores_the_track(seed in 0u64..500, axis in -500.0f64..5000.0) {
        let rec = generate(&ScenarioScript::random(seed, 3, 60)).unwrap().recording;
        for t in rec.tracks.values() {
            let twice = mirror_track(&mirror_track(t, axis), axis);
            prop_assert_eq!(twice.direction, t.direction);
            prop_assert_eq!(twice.mirrored, t.mirrored);
            for (a, b) in twice.samples.iter().zip(&t.samples) {
                prop_assert!((a.x - b.x).abs() <= 1e-9 * (1.0 + axis.abs()));
                prop_assert_eq!(a.x_velocity, b.x_velocity);
                prop_assert_eq!(a.x_acceleration, b.x_acceleration);
                prop_assert_eq!(a.lane_id, b.lane_id);
            }
        }
    }
}

fn key(i: i64) -> EventKey {
    EventKey {
        recording_id: 1,
        sv_track_id: i,
        pv_track_id: i + 100_000,
        cut_in_frame: 50,
    }
}

fn indexed_rows() -> EventRows {
    EventRows {
        event: key(0),
        first_offset: -40,
        rows: (0..EVENT_ROWS)
            .map(|k| {
                let k = k as f64;
                FeatureRow {
                    x_sv: k,
                    x_pv: 1000.0 + k,
                    v_sv: 2000.0 + k,
                    v_pv: 3000.0 + k,
                    d: 4000.0 + k,
                    acc_sv: -k,
                }
            })
            .collect(),
    }
}

#[test]
fn windows_index_the_right_rows() {
    let rows = indexed_rows();
    for t in 1..EVENT_ROWS {
        let samples = window_rows(&rows, t).unwrap();
        assert_eq!(samples.len(), EVENT_ROWS - t);
        for (i, s) in samples.iter().enumerate() {
            assert_eq!(s.inputs.len(), t);
            for (j, f) in s.inputs.iter().enumerate() {
                assert_eq!(f[0], (i + j) as f64);
                assert_eq!(f[4], 4000.0 + (i + j) as f64);
            }
            assert_eq!(s.target, -((i + t) as f64));
            assert_eq!(s.offset, -40 + i as i64);
        }
    }
    assert!(window_rows(&rows, EVENT_ROWS).is_err());
    assert!(window_rows(&rows, 0).is_err());
}

/// `sizes[e]` random windows for event `e`.
fn random_samples(rng: &mut ChaCha8Rng, sizes: &[usize], window: usize) -> Vec<SequenceSample> {
    let mut out = Vec::new();
    for (e, &n) in sizes.iter().enumerate() {
        for k in 0..n {
            out.push(SequenceSample {
                inputs: (0..window)
                    .map(|_| {
                        [
                            rng.random_range(0.0..2000.0),
                            rng.random_range(0.0..2000.0),
                            rng.random_range(15.0..35.0),
                            rng.random_range(15.0..35.0),
                            rng.random_range(0.0..60.0),
                        ]
                    })
                    .collect(),
                target: rng.random_range(-4.0..2.0),
                event: key(e as i64),
                offset: k as i64,
            });
        }
    }
    out
}

fn event_sets(train: &[SequenceSample], test: &[SequenceSample]) -> (BTreeSet<EventKey>, BTreeSet<EventKey>) {
    (
        train.iter().map(|s| s.event).collect(),
        test.iter().map(|s| s.event).collect(),
    )
}

#[test]
fn split_of_15432_windows_in_threes_gives_12345_train() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let samples = random_samples(&mut rng, &vec![3; 5144], 2);
    assert_eq!(samples.len(), 15_432);
    for seed in [0, 1, 42] {
        let split = split_dataset(samples.clone(), 0.8, seed).unwrap();
        assert_eq!((split.train.len(), split.test.len()), (12_345, 3_087), "seed {seed}");
        let (a, b) = event_sets(&split.train, &split.test);
        assert!(a.is_disjoint(&b));
    }
}

#[test]
fn uneven_events_land_near_the_ratio_without_leakage() {
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let sizes: Vec<usize> = (0..120).map(|_| rng.random_range(20..=61)).collect();
        let samples = random_samples(&mut rng, &sizes, 3);
        let split = split_dataset(samples, 0.8, seed).unwrap();
        let frac = split.train_fraction();
        assert!((0.78..=0.82).contains(&frac), "seed {seed}: {frac}");
        let (a, b) = event_sets(&split.train, &split.test);
        assert_eq!(a.intersection(&b).count(), 0);
        assert_eq!(a.len() + b.len(), 120);
    }
}

#[test]
fn split_is_a_function_of_the_seed() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let samples = random_samples(&mut rng, &[10, 7, 9, 12, 5, 8, 11, 6, 10, 9], 4);
    let a = split_dataset(samples.clone(), 0.7, 9).unwrap();
    let b = split_dataset(samples.clone(), 0.7, 9).unwrap();
    assert_eq!(a, b);
    let others: Vec<_> = (10..20).map(|s| split_dataset(samples.clone(), 0.7, s).unwrap()).collect();
    assert!(others.iter().any(|o| event_sets(&o.train, &o.test) != event_sets(&a.train, &a.test)));
}

#[test]
fn normalized_train_side_has_zero_mean_unit_std() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let samples = random_samples(&mut rng, &vec![13; 40], 5);
    let split = split_dataset(samples, 0.8, 3).unwrap();
    for f in 0..5 {
        let values: Vec<f64> = split.train.iter().flat_map(|s| s.inputs.iter().map(move |r| r[f])).collect();
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 1e-9, "feature {f} mean {mean}");
        assert!((var.sqrt() - 1.0).abs() < 1e-9, "feature {f} std {}", var.sqrt());
    }
    let targets: Vec<f64> = split.train.iter().map(|s| s.target).collect();
    let mean = targets.iter().sum::<f64>() / targets.len() as f64;
    assert!(mean.abs() < 1e-9);
}

#[test]
fn normalize_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let samples = random_samples(&mut rng, &[20; 10], 6);
    let stats = NormalizationStats::fit(&samples).unwrap();
    for s in &samples {
        let back = denormalize(&normalize(s, &stats).unwrap(), &stats).unwrap();
        for (a, b) in back.inputs.iter().flatten().zip(s.inputs.iter().flatten()) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        assert!((back.target - s.target).abs() < 1e-12);
    }
}

#[test]
fn constant_feature_gets_unit_std() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut samples = random_samples(&mut rng, &[5; 4], 3);
    for s in &mut samples {
        for r in &mut s.inputs {
            r[3] = 27.0;
        }
    }
    let stats = NormalizationStats::fit(&samples).unwrap();
    assert!(stats.constant[3]);
    assert_eq!(stats.std[3], 1.0);
    assert_eq!(stats.normalize_features(&samples[0].inputs[0])[3], 0.0);
}

#[test]
fn synthetic_pipeline_yields_61_windows_per_event() {
    let rec = normalize_direction(&generate(&ScenarioScript::planted_cut_ins(21, 4)).unwrap().recording).unwrap();
    let events = detect_cut_ins(&rec, &DetectorConfig::default()).unwrap();
    assert_eq!(events.len(), 4);
    let pairs: Vec<_> = events.iter().map(|e| (*e, &rec)).collect();
    let split = build_dataset(&pairs, 20, DistanceMode::ToCutInPoint, 0.75, 0).unwrap();
    assert_eq!(split.train.len(), 3 * 61);
    assert_eq!(split.test.len(), 61);
}
