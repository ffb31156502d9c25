//! Feature extraction, windowing and event-level train/test splitting.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detect::{CutInEvent, EventKey, EVENT_HALF_WINDOW};
use crate::ingest::Recording;

/// Number of model input features per frame.
pub const FEATURE_COUNT: usize = 5;

/// Rows per complete event: 40 before, the cut-in frame, 40 after.
pub const EVENT_ROWS: usize = (2 * EVENT_HALF_WINDOW + 1) as usize;

pub const DEFAULT_WINDOW: usize = 20;
pub const DEFAULT_SPLIT_RATIO: f64 = 0.8;

pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = ["x_sv", "x_pv", "v_sv", "v_pv", "d"];

pub type Features = [f64; FEATURE_COUNT];

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("event {event:?}: frame {frame} outside the recorded tracks")]
    WindowOutOfRange { event: EventKey, frame: i64 },
    #[error("need at least {needed} rows for window length {window}, got {rows}")]
    TooShort {
        rows: usize,
        window: usize,
        needed: usize,
    },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("split ratio must lie in (0, 1), got {0}")]
    InvalidRatio(f64),
    #[error("normalization statistics are degenerate for `{0}`")]
    DegenerateStats(&'static str),
    #[error("non-finite value in event {0:?}")]
    NonFinite(EventKey),
    #[error("malformed dataset file: {0}")]
    Malformed(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = DatasetError> = std::result::Result<T, E>;

/// How the `d` feature is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMode {
    /// PV position at the cut-in frame minus the SV's current position.
    #[default]
    ToCutInPoint,
    /// PV position minus SV position, both at the current frame.
    CurrentSeparation,
}

/// The five decision inputs of one frame plus the SV acceleration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub x_sv: f64,
    pub x_pv: f64,
    pub v_sv: f64,
    pub v_pv: f64,
    pub d: f64,
    pub acc_sv: f64,
}

impl FeatureRow {
    pub fn features(&self) -> Features {
        [self.x_sv, self.x_pv, self.v_sv, self.v_pv, self.d]
    }
}

/// The rows of one event, starting `first_offset` frames from the cut-in.
#[derive(Debug, Clone, PartialEq)]
pub struct EventRows {
    pub event: EventKey,
    pub first_offset: i64,
    pub rows: Vec<FeatureRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceSample {
    pub inputs: Vec<Features>,
    /// SV acceleration on the frame after the window.
    pub target: f64,
    pub event: EventKey,
    /// Window start frame relative to the cut-in frame.
    pub offset: i64,
}

impl SequenceSample {
    pub fn last(&self) -> &Features {
        &self.inputs[self.inputs.len() - 1]
    }
}

/// Rows for every frame of `[cut_in - 40, cut_in + 40]`.
pub fn extract_rows(event: &CutInEvent, recording: &Recording) -> Result<EventRows> {
    extract_rows_with(event, recording, DistanceMode::default())
}

pub fn extract_rows_with(
    event: &CutInEvent,
    recording: &Recording,
    mode: DistanceMode,
) -> Result<EventRows> {
    let key = event.key();
    let (lo, hi) = event.window();
    let out_of_range = |frame| DatasetError::WindowOutOfRange { event: key, frame };
    let sv = recording
        .track(event.sv_track_id)
        .ok_or(out_of_range(event.cut_in_frame))?;
    let pv = recording
        .track(event.pv_track_id)
        .ok_or(out_of_range(event.cut_in_frame))?;
    let pv_at_cut_in = pv.at(event.cut_in_frame).ok_or(out_of_range(event.cut_in_frame))?.x;

    let mut rows = Vec::with_capacity(EVENT_ROWS);
    for frame in lo..=hi {
        let s = sv.at(frame).ok_or(out_of_range(frame))?;
        let p = pv.at(frame).ok_or(out_of_range(frame))?;
        let d = match mode {
            DistanceMode::ToCutInPoint => pv_at_cut_in - s.x,
            DistanceMode::CurrentSeparation => p.x - s.x,
        };
        let row = FeatureRow {
            x_sv: s.x,
            x_pv: p.x,
            v_sv: s.x_velocity,
            v_pv: p.x_velocity,
            d,
            acc_sv: s.x_acceleration,
        };
        if !row.features().iter().chain([&row.acc_sv]).all(|v| v.is_finite()) {
            return Err(DatasetError::NonFinite(key));
        }
        rows.push(row);
    }
    Ok(EventRows {
        event: key,
        first_offset: -EVENT_HALF_WINDOW,
        rows,
    })
}

/// Stride-1 windows of `window` rows, each targeting the next row's
/// acceleration. Yields `rows - window` samples.
pub fn window_rows(rows: &EventRows, window: usize) -> Result<Vec<SequenceSample>> {
    let n = rows.rows.len();
    if window == 0 || n < window + 1 {
        return Err(DatasetError::TooShort {
            rows: n,
            window,
            needed: window + 1,
        });
    }
    Ok((0..n - window)
        .map(|k| SequenceSample {
            inputs: rows.rows[k..k + window].iter().map(FeatureRow::features).collect(),
            target: rows.rows[k + window].acc_sv,
            event: rows.event,
            offset: rows.first_offset + k as i64,
        })
        .collect())
}

/// Per-feature z-score parameters. Index 5 holds the target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub mean: [f64; FEATURE_COUNT + 1],
    pub std: [f64; FEATURE_COUNT + 1],
    /// Features whose training spread was zero; their std is stored as 1.
    pub constant: [bool; FEATURE_COUNT + 1],
}

const STAT_NAMES: [&str; FEATURE_COUNT + 1] = ["x_sv", "x_pv", "v_sv", "v_pv", "d", "acc_sv"];

impl NormalizationStats {
    pub fn identity() -> Self {
        NormalizationStats {
            mean: [0.0; FEATURE_COUNT + 1],
            std: [1.0; FEATURE_COUNT + 1],
            constant: [false; FEATURE_COUNT + 1],
        }
    }

    /// Population mean and std over every input frame and every target.
    pub fn fit(samples: &[SequenceSample]) -> Result<Self> {
        if samples.is_empty() {
            return Err(DatasetError::EmptyDataset);
        }
        let mut sum = [0.0; FEATURE_COUNT + 1];
        let mut frames = 0usize;
        for s in samples {
            for f in &s.inputs {
                for j in 0..FEATURE_COUNT {
                    sum[j] += f[j];
                }
                frames += 1;
            }
            sum[FEATURE_COUNT] += s.target;
        }
        let mut mean = [0.0; FEATURE_COUNT + 1];
        for j in 0..FEATURE_COUNT {
            mean[j] = sum[j] / frames as f64;
        }
        mean[FEATURE_COUNT] = sum[FEATURE_COUNT] / samples.len() as f64;

        let mut sq = [0.0; FEATURE_COUNT + 1];
        for s in samples {
            for f in &s.inputs {
                for j in 0..FEATURE_COUNT {
                    sq[j] += (f[j] - mean[j]).powi(2);
                }
            }
            sq[FEATURE_COUNT] += (s.target - mean[FEATURE_COUNT]).powi(2);
        }
        let mut std = [1.0; FEATURE_COUNT + 1];
        let mut constant = [false; FEATURE_COUNT + 1];
        for j in 0..=FEATURE_COUNT {
            let count = if j < FEATURE_COUNT { frames } else { samples.len() };
            let sd = (sq[j] / count as f64).sqrt();
            // spreads this small are rounding noise around a constant
            if sd > 1e-12 * mean[j].abs().max(1.0) {
                std[j] = sd;
            } else {
                constant[j] = true;
            }
        }
        Ok(NormalizationStats {
            mean,
            std,
            constant,
        })
    }

    pub fn check(&self) -> Result<()> {
        for j in 0..=FEATURE_COUNT {
            if !(self.std[j] > 0.0 && self.std[j].is_finite() && self.mean[j].is_finite()) {
                return Err(DatasetError::DegenerateStats(STAT_NAMES[j]));
            }
        }
        Ok(())
    }

    pub fn normalize_features(&self, f: &Features) -> Features {
        std::array::from_fn(|j| (f[j] - self.mean[j]) / self.std[j])
    }

    pub fn denormalize_features(&self, f: &Features) -> Features {
        std::array::from_fn(|j| f[j] * self.std[j] + self.mean[j])
    }

    pub fn normalize_target(&self, value: f64) -> f64 {
        (value - self.mean[FEATURE_COUNT]) / self.std[FEATURE_COUNT]
    }

    pub fn denormalize_target(&self, value: f64) -> f64 {
        value * self.std[FEATURE_COUNT] + self.mean[FEATURE_COUNT]
    }
}

pub fn normalize(sample: &SequenceSample, stats: &NormalizationStats) -> Result<SequenceSample> {
    stats.check()?;
    Ok(SequenceSample {
        inputs: sample.inputs.iter().map(|f| stats.normalize_features(f)).collect(),
        target: stats.normalize_target(sample.target),
        event: sample.event,
        offset: sample.offset,
    })
}

pub fn denormalize(sample: &SequenceSample, stats: &NormalizationStats) -> Result<SequenceSample> {
    stats.check()?;
    Ok(SequenceSample {
        inputs: sample.inputs.iter().map(|f| stats.denormalize_features(f)).collect(),
        target: stats.denormalize_target(sample.target),
        event: sample.event,
        offset: sample.offset,
    })
}

pub fn denormalize_target(value: f64, stats: &NormalizationStats) -> Result<f64> {
    stats.check()?;
    Ok(stats.denormalize_target(value))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitWarning {
    /// Every event landed in the training side.
    EmptyTest,
}

/// Normalized train/test windows with the statistics used to produce them.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<SequenceSample>,
    pub test: Vec<SequenceSample>,
    pub stats: NormalizationStats,
    pub split_seed: u64,
    pub ratio: f64,
    pub warnings: Vec<SplitWarning>,
}

impl DatasetSplit {
    pub fn window_length(&self) -> usize {
        self.train
            .first()
            .or(self.test.first())
            .map_or(0, |s| s.inputs.len())
    }

    pub fn train_fraction(&self) -> f64 {
        self.train.len() as f64 / (self.train.len() + self.test.len()) as f64
    }
}

/// Group windows by event, shuffle the events and fill the training side
/// first-fit up to `ratio` of all windows; the rest go to test.
///
/// Inputs are in physical units; the returned split is normalized with
/// statistics fitted on the training side.
pub fn split_dataset(samples: Vec<SequenceSample>, ratio: f64, seed: u64) -> Result<DatasetSplit> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(DatasetError::InvalidRatio(ratio));
    }
    if samples.is_empty() {
        return Err(DatasetError::EmptyDataset);
    }
    let total = samples.len();
    let mut groups: BTreeMap<EventKey, Vec<SequenceSample>> = BTreeMap::new();
    for s in samples {
        groups.entry(s.event).or_default().push(s);
    }
    let mut events: Vec<Vec<SequenceSample>> = groups.into_values().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    events.shuffle(&mut rng);

    let quota = ratio * total as f64;
    let mut in_train = vec![false; events.len()];
    let mut filled = 0usize;
    for (i, group) in events.iter().enumerate() {
        if (filled + group.len()) as f64 <= quota {
            in_train[i] = true;
            filled += group.len();
        }
    }
    if filled == 0 {
        in_train[0] = true;
    }

    let mut train = Vec::new();
    let mut test = Vec::new();
    for (group, to_train) in events.into_iter().zip(in_train) {
        if to_train {
            train.extend(group);
        } else {
            test.extend(group);
        }
    }
    let mut warnings = Vec::new();
    if test.is_empty() {
        log::warn!("split left the test side empty ({} windows in one event group)", total);
        warnings.push(SplitWarning::EmptyTest);
    }
    let stats = NormalizationStats::fit(&train)?;
    let train = train
        .iter()
        .map(|s| normalize(s, &stats))
        .collect::<Result<Vec<_>>>()?;
    let test = test
        .iter()
        .map(|s| normalize(s, &stats))
        .collect::<Result<Vec<_>>>()?;
    Ok(DatasetSplit {
        train,
        test,
        stats,
        split_seed: seed,
        ratio,
        warnings,
    })
}

/// Extract, window and split in one go.
pub fn build_dataset(
    events: &[(CutInEvent, &Recording)],
    window: usize,
    mode: DistanceMode,
    ratio: f64,
    seed: u64,
) -> Result<DatasetSplit> {
    let mut samples = Vec::new();
    for (event, recording) in events {
        let rows = extract_rows_with(event, recording, mode)?;
        samples.extend(window_rows(&rows, window)?);
    }
    split_dataset(samples, ratio, seed)
}

const SAMPLE_HEADER: [&str; 13] = [
    "sample",
    "step",
    "recording_id",
    "sv_track_id",
    "pv_track_id",
    "cut_in_frame",
    "offset",
    "x_sv",
    "x_pv",
    "v_sv",
    "v_pv",
    "d",
    "target",
];

/// One row per (sample, step); the target is repeated on every step.
pub fn write_samples<W: Write>(samples: &[SequenceSample], out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(SAMPLE_HEADER)?;
    for (i, s) in samples.iter().enumerate() {
        for (step, f) in s.inputs.iter().enumerate() {
            let mut record = vec![
                i.to_string(),
                step.to_string(),
                s.event.recording_id.to_string(),
                s.event.sv_track_id.to_string(),
                s.event.pv_track_id.to_string(),
                s.event.cut_in_frame.to_string(),
                s.offset.to_string(),
            ];
            record.extend(f.iter().map(f64::to_string));
            record.push(s.target.to_string());
            writer.write_record(&record)?;
        }
    }
    writer.flush()?;
    Ok(())
}

pub fn read_samples<R: Read>(input: R) -> Result<Vec<SequenceSample>> {
    let mut reader = csv::Reader::from_reader(input);
    if reader.headers()?.iter().ne(SAMPLE_HEADER) {
        return Err(DatasetError::Malformed("unexpected header".into()));
    }
    let mut samples: Vec<SequenceSample> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let bad = || DatasetError::Malformed(format!("data row {}", line + 1));
        let int = |k: usize| record[k].parse::<i64>().map_err(|_| bad());
        let float = |k: usize| record[k].parse::<f64>().map_err(|_| bad());
        let index = int(0)? as usize;
        let step = int(1)? as usize;
        let event = EventKey {
            recording_id: int(2)?,
            sv_track_id: int(3)?,
            pv_track_id: int(4)?,
            cut_in_frame: int(5)?,
        };
        let features = [float(7)?, float(8)?, float(9)?, float(10)?, float(11)?];
        if index == samples.len() && step == 0 {
            samples.push(SequenceSample {
                inputs: vec![features],
                target: float(12)?,
                event,
                offset: int(6)?,
            });
        } else if index + 1 == samples.len() && step == samples[index].inputs.len() {
            samples[index].inputs.push(features);
        } else {
            return Err(bad());
        }
    }
    Ok(samples)
}

/// Everything needed besides the sample files to reproduce a split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub window_length: usize,
    pub ratio: f64,
    pub split_seed: u64,
    pub distance_mode: DistanceMode,
    pub stats: NormalizationStats,
    pub train_samples: usize,
    pub test_samples: usize,
    pub warnings: Vec<SplitWarning>,
}

pub fn save_split(split: &DatasetSplit, mode: DistanceMode, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_samples(&split.train, fs::File::create(dir.join("train.csv"))?)?;
    write_samples(&split.test, fs::File::create(dir.join("test.csv"))?)?;
    let manifest = DatasetManifest {
        window_length: split.window_length(),
        ratio: split.ratio,
        split_seed: split.split_seed,
        distance_mode: mode,
        stats: split.stats,
        train_samples: split.train.len(),
        test_samples: split.test.len(),
        warnings: split.warnings.clone(),
    };
    fs::write(
        dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)? + "\n",
    )?;
    Ok(())
}

pub fn load_split(dir: &Path) -> Result<(DatasetSplit, DatasetManifest)> {
    let manifest: DatasetManifest =
        serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?;
    let train = read_samples(fs::File::open(dir.join("train.csv"))?)?;
    let test = read_samples(fs::File::open(dir.join("test.csv"))?)?;
    if train.len() != manifest.train_samples || test.len() != manifest.test_samples {
        return Err(DatasetError::Malformed("sample counts disagree with manifest".into()));
    }
    if train
        .iter()
        .chain(&test)
        .any(|s| s.inputs.len() != manifest.window_length)
    {
        return Err(DatasetError::Malformed("window length disagrees with manifest".into()));
    }
    let split = DatasetSplit {
        train,
        test,
        stats: manifest.stats,
        split_seed: manifest.split_seed,
        ratio: manifest.ratio,
        warnings: manifest.warnings.clone(),
    };
    Ok((split, manifest))
}
