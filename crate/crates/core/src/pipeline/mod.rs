//! File-based pipeline stages behind the command-line tool.
//!
//! Every stage reads its predecessor's files under the output directory and
//! writes its own, plus a manifest with the config echo and SHA-256 digests
//! of what it read and wrote:
//!
//! ```text
//! <out>/recordings/      synth: <id>_tracks.csv, <id>_meta.txt, ground_truth.csv
//! <out>/ingest/          ingest: normalized tracks, recordings.csv
//! <out>/events.csv       detect
//! <out>/dataset/         build-dataset: train.csv, test.csv, manifest.json
//! <out>/checkpoints/     train: <model>.ckpt, <model>_trace.csv, <model>_iterations.csv
//! <out>/eval/            evaluate: metrics.csv, residuals.csv
//! <out>/sim/             simulate: sim.csv, summary.json
//! <out>/report/          report: metrics.csv, trace.csv, residuals.csv, sim.csv, summary.txt
//! <out>/manifests/       one <stage>.json per stage
//! ```

mod config;

pub use config::{DatasetParams, ModelParams, Overrides, Paths, RunConfig, SimParams, SynthKind, SynthParams};

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dataset::{build_dataset, load_split, save_split, DatasetError};
use crate::detect::{detect_cut_ins, read_events, write_events, CutInEvent, DetectError};
use crate::evaluation::{
    evaluate_models, simulate_cut_in, write_metrics, write_residuals, write_sim, EvalError, ModelController,
    Playback, SimConfig,
};
use crate::ingest::{
    normalize_direction, parse_tracks_with, write_tracks, ColumnMap, IngestError, Recording, RecordingMeta,
};
use crate::predictors::{
    train, write_iterations, write_trace, AnnConfig, AnnNet, LstmNet, LstmNetConfig, Model, MpcController,
    PredictError, TrainError,
};
use crate::synth::{generate, sequence_dependent_corpus, Generated, ScenarioScript, SynthError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid config: {0}")]
    ConfigInvalid(String),
    #[error("{stage}: missing input {}", path.display())]
    UpstreamArtifactMissing { stage: &'static str, path: PathBuf },
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Detect(#[from] DetectError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Predict(#[from] PredictError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl PipelineError {
    pub fn category(&self) -> &'static str {
        match self {
            PipelineError::ConfigInvalid(_) => "config",
            PipelineError::UpstreamArtifactMissing { .. } => "missing-input",
            PipelineError::Synth(_) => "synth",
            PipelineError::Ingest(_) => "ingest",
            PipelineError::Detect(_) => "detect",
            PipelineError::Dataset(_) => "dataset",
            PipelineError::Train(_) => "train",
            PipelineError::Predict(_) => "predict",
            PipelineError::Eval(_) => "evaluate",
            PipelineError::Csv(_) | PipelineError::Json(_) | PipelineError::Io(_) => "io",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::ConfigInvalid(_) => 2,
            PipelineError::UpstreamArtifactMissing { .. } => 3,
            _ => 1,
        }
    }
}

pub type Result<T, E = PipelineError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Synth,
    Ingest,
    Detect,
    BuildDataset,
    Train,
    Evaluate,
    Simulate,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Synth,
        Stage::Ingest,
        Stage::Detect,
        Stage::BuildDataset,
        Stage::Train,
        Stage::Evaluate,
        Stage::Simulate,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Synth => "synth",
            Stage::Ingest => "ingest",
            Stage::Detect => "detect",
            Stage::BuildDataset => "build-dataset",
            Stage::Train => "train",
            Stage::Evaluate => "evaluate",
            Stage::Simulate => "simulate",
            Stage::Report => "report",
        }
    }
}

/// Validate the config and run one stage.
pub fn run_stage(stage: Stage, cfg: &RunConfig) -> Result<()> {
    cfg.validate()?;
    let mut ctx = Ctx::new(stage, cfg);
    match stage {
        Stage::Synth => synth(&mut ctx)?,
        Stage::Ingest => ingest(&mut ctx)?,
        Stage::Detect => detect(&mut ctx)?,
        Stage::BuildDataset => dataset(&mut ctx)?,
        Stage::Train => train_models(&mut ctx)?,
        Stage::Evaluate => evaluate(&mut ctx)?,
        Stage::Simulate => simulate(&mut ctx)?,
        Stage::Report => report(&mut ctx)?,
    }
    ctx.finish()
}

#[derive(Debug, Serialize)]
struct FileDigest {
    path: String,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct StageManifest<'a> {
    stage: &'static str,
    seed: u64,
    config: &'a RunConfig,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
}

/// Tracks what a stage read and wrote.
struct Ctx<'a> {
    stage: Stage,
    cfg: &'a RunConfig,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

impl<'a> Ctx<'a> {
    fn new(stage: Stage, cfg: &'a RunConfig) -> Self {
        Ctx {
            stage,
            cfg,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    fn out(&self, rel: &str) -> PathBuf {
        self.cfg.paths.out.join(rel)
    }

    fn open(&mut self, path: &Path) -> Result<BufReader<File>> {
        match File::open(path) {
            Ok(f) => {
                self.inputs.push(path.to_path_buf());
                Ok(BufReader::new(f))
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(self.missing(path)),
            Err(e) => Err(e.into()),
        }
    }

    fn missing(&self, path: &Path) -> PipelineError {
        PipelineError::UpstreamArtifactMissing {
            stage: self.stage.name(),
            path: path.to_path_buf(),
        }
    }

    fn create(&mut self, path: &Path) -> Result<BufWriter<File>> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        self.outputs.push(path.to_path_buf());
        Ok(BufWriter::new(File::create(path)?))
    }

    fn write_bytes(&mut self, path: &Path, bytes: &[u8]) -> Result<()> {
        let mut w = self.create(path)?;
        w.write_all(bytes)?;
        w.flush()?;
        Ok(())
    }

    fn rel(&self, path: &Path) -> String {
        path.strip_prefix(&self.cfg.paths.out)
            .unwrap_or(path)
            .to_string_lossy()
            .replace('\\', "/")
    }

    fn finish(self) -> Result<()> {
        let digests = |paths: &[PathBuf]| -> Result<Vec<FileDigest>> {
            let mut seen: Vec<&PathBuf> = paths.iter().collect();
            seen.sort();
            seen.dedup();
            seen.into_iter()
                .map(|p| {
                    Ok(FileDigest {
                        path: self.rel(p),
                        sha256: sha256_file(p)?,
                    })
                })
                .collect()
        };
        let manifest = StageManifest {
            stage: self.stage.name(),
            seed: self.cfg.seed,
            config: self.cfg,
            inputs: digests(&self.inputs)?,
            outputs: digests(&self.outputs)?,
        };
        let path = self.out(&format!("manifests/{}.json", self.stage.name()));
        fs::create_dir_all(path.parent().expect("manifest dir"))?;
        fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")?;
        log::info!("{}: wrote {}", self.stage.name(), path.display());
        Ok(())
    }
}

pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    let mut hasher = Sha256::new();
    let mut f = File::open(path)?;
    let mut buf = [0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

fn synth(ctx: &mut Ctx) -> Result<()> {
    let cfg = ctx.cfg;
    let p = &cfg.synth;
    let generated: Vec<Generated> = match p.kind {
        SynthKind::Planted => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            (0..p.recordings)
                .map(|r| {
                    let mut script = ScenarioScript::planted_cut_ins(rng.random(), p.events_per_recording);
                    script.recording_id = r as i64 + 1;
                    script.decreasing = p.mixed_directions && r % 2 == 1;
                    generate(&script)
                })
                .collect::<Result<_, _>>()?
        }
        SynthKind::Sequence => {
            sequence_dependent_corpus(cfg.seed, p.recordings * p.events_per_recording, p.lag).recordings
        }
    };
    let dir = ctx.out("recordings");
    let mut truth: Vec<CutInEvent> = Vec::new();
    for g in &generated {
        let id = g.recording.recording_id;
        let mut w = ctx.create(&dir.join(format!("{id:02}_tracks.csv")))?;
        write_tracks(&g.recording, &mut w)?;
        w.flush()?;
        let meta = RecordingMeta {
            recording_id: id,
            frame_rate: g.recording.frame_rate,
            lane_count: Some(g.recording.lane_count),
        };
        ctx.write_bytes(&dir.join(format!("{id:02}_meta.txt")), meta.to_text().as_bytes())?;
        truth.extend(g.ground_truth.iter().copied());
    }
    let mut w = ctx.create(&dir.join("ground_truth.csv"))?;
    write_events(&truth, &mut w)?;
    w.flush()?;
    log::info!("synth: {} recordings, {} planted events", generated.len(), truth.len());
    Ok(())
}

/// `<prefix>_tracks.csv` files in a directory, sorted by name.
fn track_files(ctx: &Ctx, dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    if !dir.is_dir() {
        return Err(ctx.missing(dir));
    }
    let mut files: Vec<(String, PathBuf)> = fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let name = e.file_name().to_string_lossy().into_owned();
            name.strip_suffix("_tracks.csv").map(|p| (p.to_string(), e.path()))
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(ctx.missing(&dir.join("*_tracks.csv")));
    }
    Ok(files)
}

/// Sidecar metadata: `<prefix>_meta.txt`, else highD's `<prefix>_recordingMeta.csv`,
/// else the numeric prefix with default frame rate.
fn read_meta(ctx: &mut Ctx, dir: &Path, prefix: &str, index: usize) -> Result<RecordingMeta> {
    let txt = dir.join(format!("{prefix}_meta.txt"));
    if txt.is_file() {
        let mut text = String::new();
        ctx.open(&txt)?.read_to_string(&mut text)?;
        return Ok(RecordingMeta::parse(&text)?);
    }
    let highd = dir.join(format!("{prefix}_recordingMeta.csv"));
    if highd.is_file() {
        let mut reader = csv::Reader::from_reader(ctx.open(&highd)?);
        let headers = reader.headers()?.clone();
        if let Some(row) = reader.records().next() {
            let row = row?;
            let get = |k: &str| headers.iter().position(|h| h.trim() == k).and_then(|i| row.get(i));
            let mut text = String::new();
            if let Some(id) = get("id") {
                text.push_str(&format!("recording_id={}\n", id.trim()));
            }
            if let Some(rate) = get("frameRate") {
                text.push_str(&format!("frame_rate={}\n", rate.trim()));
            }
            return Ok(RecordingMeta::parse(&text)?);
        }
    }
    let id = prefix.parse::<i64>().unwrap_or(index as i64 + 1);
    Ok(RecordingMeta::new(id))
}

fn read_recordings(ctx: &mut Ctx, dir: &Path) -> Result<Vec<Recording>> {
    let mut out = Vec::new();
    for (i, (prefix, path)) in track_files(ctx, dir)?.into_iter().enumerate() {
        let meta = read_meta(ctx, dir, &prefix, i)?;
        let reader = ctx.open(&path)?;
        let rec = parse_tracks_with(reader, &meta, &ColumnMap::default())?;
        out.push(normalize_direction(&rec)?);
    }
    out.sort_by_key(|r| r.recording_id);
    Ok(out)
}

fn ingest(ctx: &mut Ctx) -> Result<()> {
    let input = ctx.cfg.input_dir();
    let recordings = read_recordings(ctx, &input)?;
    let dir = ctx.out("ingest");
    let mut summary = csv::Writer::from_writer(Vec::new());
    summary.write_record(["recording_id", "frame_rate", "lane_count", "tracks", "samples", "mirror_axis"])?;
    for rec in &recordings {
        let id = rec.recording_id;
        let mut w = ctx.create(&dir.join(format!("{id:02}_tracks.csv")))?;
        write_tracks(rec, &mut w)?;
        w.flush()?;
        let meta = RecordingMeta {
            recording_id: id,
            frame_rate: rec.frame_rate,
            lane_count: Some(rec.lane_count),
        };
        ctx.write_bytes(&dir.join(format!("{id:02}_meta.txt")), meta.to_text().as_bytes())?;
        summary.write_record([
            id.to_string(),
            rec.frame_rate.to_string(),
            rec.lane_count.to_string(),
            rec.tracks.len().to_string(),
            rec.sample_count().to_string(),
            rec.mirror_axis.map_or(String::new(), |a| a.to_string()),
        ])?;
        log::info!("ingest: recording {id}: {} tracks, {} samples", rec.tracks.len(), rec.sample_count());
    }
    let bytes = summary.into_inner().map_err(|e| e.into_error())?;
    ctx.write_bytes(&dir.join("recordings.csv"), &bytes)?;
    Ok(())
}

fn ingested(ctx: &mut Ctx) -> Result<BTreeMap<i64, Recording>> {
    let dir = ctx.out("ingest");
    Ok(read_recordings(ctx, &dir)?
        .into_iter()
        .map(|r| (r.recording_id, r))
        .collect())
}

fn detect(ctx: &mut Ctx) -> Result<()> {
    let recordings = ingested(ctx)?;
    let mut events = Vec::new();
    for rec in recordings.values() {
        let found = detect_cut_ins(rec, &ctx.cfg.detect)?;
        log::info!("detect: recording {}: {} cut-ins", rec.recording_id, found.len());
        events.extend(found);
    }
    let path = ctx.out("events.csv");
    let mut w = ctx.create(&path)?;
    write_events(&events, &mut w)?;
    w.flush()?;
    log::info!("detect: {} events in total", events.len());
    Ok(())
}

fn read_event_file(ctx: &mut Ctx) -> Result<Vec<CutInEvent>> {
    let path = ctx.out("events.csv");
    Ok(read_events(ctx.open(&path)?)?)
}

fn dataset(ctx: &mut Ctx) -> Result<()> {
    let events = read_event_file(ctx)?;
    let recordings = ingested(ctx)?;
    let mut pairs = Vec::with_capacity(events.len());
    for e in events {
        let rec = recordings.get(&e.recording_id).ok_or_else(|| {
            PipelineError::UpstreamArtifactMissing {
                stage: "build-dataset",
                path: ctx.out(&format!("ingest/{:02}_tracks.csv", e.recording_id)),
            }
        })?;
        pairs.push((e, rec));
    }
    let p = &ctx.cfg.dataset;
    let split = build_dataset(&pairs, p.window_length, p.distance_mode, p.ratio, ctx.cfg.seed)?;
    let dir = ctx.out("dataset");
    save_split(&split, p.distance_mode, &dir)?;
    for f in ["train.csv", "test.csv", "manifest.json"] {
        ctx.outputs.push(dir.join(f));
    }
    log::info!("build-dataset: {} train / {} test windows", split.train.len(), split.test.len());
    Ok(())
}

fn load_dataset(ctx: &mut Ctx) -> Result<(crate::dataset::DatasetSplit, crate::dataset::DatasetManifest)> {
    let dir = ctx.out("dataset");
    for f in ["train.csv", "test.csv", "manifest.json"] {
        let p = dir.join(f);
        if !p.is_file() {
            return Err(ctx.missing(&p));
        }
        ctx.inputs.push(p);
    }
    Ok(load_split(&dir)?)
}

fn trainable(cfg: &RunConfig) -> impl Iterator<Item = &str> {
    cfg.model.models.iter().map(String::as_str).filter(|m| *m != "mpc")
}

fn train_models(ctx: &mut Ctx) -> Result<()> {
    let (split, manifest) = load_dataset(ctx)?;
    let cfg = ctx.cfg;
    let tc = cfg.train_config();
    let window = manifest.window_length;
    for name in trainable(cfg) {
        log::info!("train: {name}, width {}, window {window}", cfg.model.width);
        let (model, trace) = match name {
            "lstm" => {
                let mut net = LstmNet::new(LstmNetConfig::uniform(cfg.model.width, window))?;
                let trace = train(&mut net, &split, &tc)?;
                (Model::Lstm(net), trace)
            }
            "ann" => {
                let mut net = AnnNet::new(AnnConfig::uniform(cfg.model.width, window))?;
                let trace = train(&mut net, &split, &tc)?;
                (Model::Ann(net), trace)
            }
            other => return Err(PipelineError::ConfigInvalid(format!("cannot train `{other}`"))),
        };
        log::info!(
            "train: {name} stopped ({:?}) after {} epochs, best epoch {} val rmse {:.5}",
            trace.stop_reason,
            trace.epochs.len(),
            trace.best_epoch,
            trace.best_val_rmse
        );
        let dir = ctx.out("checkpoints");
        let mut w = ctx.create(&dir.join(format!("{name}.ckpt")))?;
        model.save(&mut w)?;
        w.flush()?;
        let mut w = ctx.create(&dir.join(format!("{name}_trace.csv")))?;
        write_trace(&trace, &mut w)?;
        w.flush()?;
        let mut w = ctx.create(&dir.join(format!("{name}_iterations.csv")))?;
        write_iterations(&trace, &mut w)?;
        w.flush()?;
    }
    Ok(())
}

fn load_model(ctx: &mut Ctx, name: &str) -> Result<Model> {
    if name == "mpc" {
        return Ok(Model::Mpc(MpcController::new(ctx.cfg.mpc)?));
    }
    let path = ctx.out(&format!("checkpoints/{name}.ckpt"));
    let reader = ctx.open(&path)?;
    Ok(Model::load(reader)?)
}

fn evaluated_models(cfg: &RunConfig) -> Vec<String> {
    let mut names: Vec<String> = trainable(cfg).map(String::from).collect();
    names.push("mpc".into());
    names
}

fn evaluate(ctx: &mut Ctx) -> Result<()> {
    let (split, _) = load_dataset(ctx)?;
    let names = evaluated_models(ctx.cfg);
    let models = names
        .iter()
        .map(|n| load_model(ctx, n))
        .collect::<Result<Vec<_>>>()?;
    let pairs: Vec<(&str, &Model)> = names.iter().map(String::as_str).zip(&models).collect();
    let mut report = evaluate_models(&pairs, &split.test, &split.stats)?;
    report.trace = Some("checkpoints/<model>_trace.csv".into());
    for s in &report.scores {
        log::info!("evaluate: {} rmse {:.4} m/s2, accuracy {:.2}% over {}", s.model, s.rmse, s.accuracy_pct, s.n);
    }
    let dir = ctx.out("eval");
    let mut w = ctx.create(&dir.join("metrics.csv"))?;
    write_metrics(&report, &mut w)?;
    w.flush()?;
    let mut w = ctx.create(&dir.join("residuals.csv"))?;
    write_residuals(&report, &mut w)?;
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct SimSummary {
    controller: String,
    event: CutInEvent,
    steps: usize,
    min_gap: f64,
    collision: bool,
}

fn simulate(ctx: &mut Ctx) -> Result<()> {
    let events = read_event_file(ctx)?;
    let recordings = ingested(ctx)?;
    let (_, manifest) = load_dataset(ctx)?;
    let p = ctx.cfg.sim.clone();
    let event = *events.get(p.event).ok_or_else(|| {
        PipelineError::ConfigInvalid(format!("sim.event {} out of range ({} events)", p.event, events.len()))
    })?;
    let rec = recordings.get(&event.recording_id).ok_or_else(|| {
        ctx.missing(&ctx.out(&format!("ingest/{:02}_tracks.csv", event.recording_id)))
    })?;
    let model = load_model(ctx, &p.controller)?;
    let window = manifest.window_length;
    let playback = Playback::from_event(&event, rec, window - 1, manifest.distance_mode)?;
    let mut controller = ModelController {
        model,
        stats: manifest.stats,
        window,
    };
    let sim = SimConfig {
        dt: rec.dt(),
        a_min: p.a_min,
        a_max: p.a_max,
    };
    let result = simulate_cut_in(&playback, &mut controller, &sim)?;
    log::info!(
        "simulate: {} on event {:?}: min gap {:.2} m, collision {}",
        p.controller,
        event.key(),
        result.min_gap,
        result.collision
    );
    let dir = ctx.out("sim");
    let mut w = ctx.create(&dir.join("sim.csv"))?;
    write_sim(&result, &mut w)?;
    w.flush()?;
    let summary = SimSummary {
        controller: p.controller.clone(),
        event,
        steps: result.t.len(),
        min_gap: result.min_gap,
        collision: result.collision,
    };
    ctx.write_bytes(&dir.join("summary.json"), (serde_json::to_string_pretty(&summary)? + "\n").as_bytes())?;
    Ok(())
}

fn copy_into(ctx: &mut Ctx, from: &Path, to: &Path) -> Result<Vec<u8>> {
    let mut bytes = Vec::new();
    ctx.open(from)?.read_to_end(&mut bytes)?;
    ctx.write_bytes(to, &bytes)?;
    Ok(bytes)
}

fn report(ctx: &mut Ctx) -> Result<()> {
    let dir = ctx.out("report");
    let metrics = copy_into(ctx, &ctx.out("eval/metrics.csv"), &dir.join("metrics.csv"))?;
    copy_into(ctx, &ctx.out("eval/residuals.csv"), &dir.join("residuals.csv"))?;

    let mut trace = csv::Writer::from_writer(Vec::new());
    trace.write_record(["model", "epoch", "train_rmse", "val_rmse"])?;
    for name in trainable(ctx.cfg).map(String::from).collect::<Vec<_>>() {
        let path = ctx.out(&format!("checkpoints/{name}_trace.csv"));
        let mut reader = csv::Reader::from_reader(ctx.open(&path)?);
        for row in reader.records() {
            let row = row?;
            trace.write_record(std::iter::once(name.as_str()).chain(row.iter()))?;
        }
    }
    let bytes = trace.into_inner().map_err(|e| e.into_error())?;
    ctx.write_bytes(&dir.join("trace.csv"), &bytes)?;

    let sim = ctx.out("sim/sim.csv");
    let sim_note = if sim.is_file() {
        copy_into(ctx, &sim, &dir.join("sim.csv"))?;
        let mut text = String::new();
        ctx.open(&ctx.out("sim/summary.json"))?.read_to_string(&mut text)?;
        let v: serde_json::Value = serde_json::from_str(&text)?;
        format!(
            "simulation ({}): min gap {} m, collision {}\n",
            v["controller"].as_str().unwrap_or("?"),
            v["min_gap"],
            v["collision"]
        )
    } else {
        log::warn!("report: no simulation output, skipping sim.csv");
        String::new()
    };

    let mut summary = String::from("model   rmse_m_s2   accuracy_pct   n\n");
    let mut reader = csv::Reader::from_reader(metrics.as_slice());
    for row in reader.records() {
        let row = row?;
        let num = |i: usize| row.get(i).and_then(|s| s.parse::<f64>().ok()).unwrap_or(f64::NAN);
        summary.push_str(&format!(
            "{:<7} {:>9.4}   {:>12.2}   {}\n",
            row.get(0).unwrap_or("?"),
            num(1),
            num(2),
            row.get(3).unwrap_or("?")
        ));
    }
    summary.push_str(&sim_note);
    ctx.write_bytes(&dir.join("summary.txt"), summary.as_bytes())?;
    Ok(())
}
