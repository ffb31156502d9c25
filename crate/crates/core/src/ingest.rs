//! Parsing and validation of highD-style `tracks.csv` recordings.
//!
//! A recording file holds one row per (frame, vehicle). Rows are grouped into
//! per-vehicle [`Track`]s ordered by frame. Column names are looked up through
//! a [`ColumnMap`], so column order in the file does not matter.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Frame rate used when a recording does not say otherwise (Δt = 0.04 s).
pub const DEFAULT_FRAME_RATE: f64 = 25.0;

/// Vehicles at least this long (m) are classed as trucks.
pub const TRUCK_MIN_LENGTH: f64 = 7.5;

/// Median |x_velocity| at or below this value (m/s) has no usable direction.
pub const DIRECTION_DEADBAND: f64 = 0.1;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("header is missing column `{column}`")]
    MissingColumn { column: String },
    #[error("line {line}: cannot parse `{column}` value `{value}`")]
    MalformedRow {
        line: u64,
        column: String,
        value: String,
    },
    #[error("line {line}: {reason}")]
    InvalidSample { line: u64, reason: String },
    #[error("track {track_id}: expected frame {expected}, found {found}")]
    NonContiguousFrames {
        track_id: i64,
        expected: i64,
        found: i64,
    },
    #[error("track {track_id}: median x velocity {median} is too close to zero to infer a direction")]
    AmbiguousDirection { track_id: i64, median: f64 },
    #[error("invalid recording metadata: {0}")]
    InvalidMetadata(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = IngestError> = std::result::Result<T, E>;

/// One row of a tracks file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackSample {
    pub frame: i64,
    pub track_id: i64,
    /// Longitudinal position (m).
    pub x: f64,
    /// Lateral position (m).
    pub y: f64,
    /// Vehicle extent along x (m), i.e. its length.
    pub width: f64,
    /// Vehicle extent along y (m).
    pub height: f64,
    pub x_velocity: f64,
    pub y_velocity: f64,
    pub x_acceleration: f64,
    pub y_acceleration: f64,
    pub preceding_x_velocity: f64,
    pub lane_id: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VehicleClass {
    Car,
    Truck,
}

impl VehicleClass {
    pub fn from_length(length: f64) -> Self {
        if length >= TRUCK_MIN_LENGTH {
            VehicleClass::Truck
        } else {
            VehicleClass::Car
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    IncreasingX,
    DecreasingX,
}

/// All samples of one vehicle, contiguous in frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub track_id: i64,
    pub vehicle_class: VehicleClass,
    pub direction: Direction,
    /// Set once the track has been mirrored into the +x frame.
    pub mirrored: bool,
    pub samples: Vec<TrackSample>,
}

impl Track {
    pub fn first_frame(&self) -> i64 {
        self.samples[0].frame
    }

    pub fn last_frame(&self) -> i64 {
        self.samples[self.samples.len() - 1].frame
    }

    pub fn covers(&self, from: i64, to: i64) -> bool {
        from >= self.first_frame() && to <= self.last_frame()
    }

    /// Sample at `frame`, if the track is alive then.
    pub fn at(&self, frame: i64) -> Option<&TrackSample> {
        let offset = frame - self.first_frame();
        if offset < 0 {
            return None;
        }
        self.samples.get(offset as usize)
    }

    pub fn median_x_velocity(&self) -> f64 {
        median(self.samples.iter().map(|s| s.x_velocity).collect())
    }

    pub fn length(&self) -> f64 {
        median(self.samples.iter().map(|s| s.width).collect())
    }
}

/// A parsed recording. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub recording_id: i64,
    /// Hz.
    pub frame_rate: f64,
    pub lane_count: i64,
    pub tracks: BTreeMap<i64, Track>,
    /// True once [`normalize_direction`] has run.
    pub normalized: bool,
    /// Reference used for mirroring decreasing-x tracks.
    pub mirror_axis: Option<f64>,
}

impl Recording {
    pub fn dt(&self) -> f64 {
        1.0 / self.frame_rate
    }

    pub fn sample_count(&self) -> usize {
        self.tracks.values().map(|t| t.samples.len()).sum()
    }

    pub fn track(&self, id: i64) -> Option<&Track> {
        self.tracks.get(&id)
    }

    /// Build a recording from tracks, inferring class, direction and lane count.
    pub fn from_tracks(
        recording_id: i64,
        frame_rate: f64,
        lane_count: Option<i64>,
        tracks: Vec<Track>,
    ) -> Self {
        let tracks: BTreeMap<i64, Track> = tracks.into_iter().map(|t| (t.track_id, t)).collect();
        let lane_count = lane_count.unwrap_or_else(|| distinct_lanes(&tracks));
        Recording {
            recording_id,
            frame_rate,
            lane_count,
            tracks,
            normalized: false,
            mirror_axis: None,
        }
    }
}

fn distinct_lanes(tracks: &BTreeMap<i64, Track>) -> i64 {
    let mut lanes: Vec<i64> = tracks
        .values()
        .flat_map(|t| t.samples.iter().map(|s| s.lane_id))
        .collect();
    lanes.sort_unstable();
    lanes.dedup();
    lanes.len() as i64
}

pub(crate) fn median(mut values: Vec<f64>) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Header names for the twelve logical columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, rename_all = "camelCase")]
pub struct ColumnMap {
    pub frame: String,
    pub id: String,
    pub x: String,
    pub y: String,
    pub width: String,
    pub height: String,
    pub x_velocity: String,
    pub y_velocity: String,
    pub x_acceleration: String,
    pub y_acceleration: String,
    pub preceding_x_velocity: String,
    pub lane_id: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap {
            frame: "frame".into(),
            id: "id".into(),
            x: "x".into(),
            y: "y".into(),
            width: "width".into(),
            height: "height".into(),
            x_velocity: "xVelocity".into(),
            y_velocity: "yVelocity".into(),
            x_acceleration: "xAcceleration".into(),
            y_acceleration: "yAcceleration".into(),
            preceding_x_velocity: "precedingXVelocity".into(),
            lane_id: "laneId".into(),
        }
    }
}

impl ColumnMap {
    fn names(&self) -> [&str; 12] {
        [
            &self.frame,
            &self.id,
            &self.x,
            &self.y,
            &self.width,
            &self.height,
            &self.x_velocity,
            &self.y_velocity,
            &self.x_acceleration,
            &self.y_acceleration,
            &self.preceding_x_velocity,
            &self.lane_id,
        ]
    }
}

/// Per-recording metadata, read from an optional `key=value` sidecar file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordingMeta {
    pub recording_id: i64,
    pub frame_rate: f64,
    pub lane_count: Option<i64>,
}

impl RecordingMeta {
    pub fn new(recording_id: i64) -> Self {
        RecordingMeta {
            recording_id,
            frame_rate: DEFAULT_FRAME_RATE,
            lane_count: None,
        }
    }

    /// Parse `key=value` lines. Blank lines and `#` comments are ignored;
    /// `recording_id` is required, the rest default.
    pub fn parse(text: &str) -> Result<Self> {
        let mut recording_id = None;
        let mut frame_rate = DEFAULT_FRAME_RATE;
        let mut lane_count = None;
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                IngestError::InvalidMetadata(format!("line {}: expected key=value", n + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            let bad = |_| IngestError::InvalidMetadata(format!("line {}: bad value for {key}", n + 1));
            match key {
                "recording_id" | "id" => recording_id = Some(value.parse::<i64>().map_err(bad)?),
                "frame_rate" | "frameRate" => {
                    frame_rate = value
                        .parse::<f64>()
                        .map_err(|_| IngestError::InvalidMetadata(format!("line {}: bad frame_rate", n + 1)))?
                }
                "lane_count" => lane_count = Some(value.parse::<i64>().map_err(bad)?),
                _ => {}
            }
        }
        let recording_id = recording_id
            .ok_or_else(|| IngestError::InvalidMetadata("missing recording_id".into()))?;
        if !(frame_rate > 0.0 && frame_rate.is_finite()) {
            return Err(IngestError::InvalidMetadata(format!(
                "frame_rate must be positive, got {frame_rate}"
            )));
        }
        Ok(RecordingMeta {
            recording_id,
            frame_rate,
            lane_count,
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "recording_id={}\nframe_rate={}\n",
            self.recording_id, self.frame_rate
        );
        if let Some(lanes) = self.lane_count {
            out.push_str(&format!("lane_count={lanes}\n"));
        }
        out
    }
}

/// Parse a tracks file with the default column names.
pub fn parse_tracks<R: Read>(input: R, recording_id: i64, frame_rate: f64) -> Result<Recording> {
    let meta = RecordingMeta {
        recording_id,
        frame_rate,
        lane_count: None,
    };
    parse_tracks_with(input, &meta, &ColumnMap::default())
}

pub fn parse_tracks_with<R: Read>(
    input: R,
    meta: &RecordingMeta,
    columns: &ColumnMap,
) -> Result<Recording> {
    if !(meta.frame_rate > 0.0 && meta.frame_rate.is_finite()) {
        return Err(IngestError::InvalidMetadata(format!(
            "frame_rate must be positive, got {}",
            meta.frame_rate
        )));
    }
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = reader.headers()?.clone();
    let names = columns.names();
    let mut index = [0usize; 12];
    for (slot, name) in index.iter_mut().zip(names) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| IngestError::MissingColumn {
                column: name.to_string(),
            })?;
    }

    let mut by_track: BTreeMap<i64, Vec<TrackSample>> = BTreeMap::new();
    let mut record = csv::StringRecord::new();
    while reader.read_record(&mut record)? {
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |k: usize| record.get(index[k]).unwrap_or("");
        let float = |k: usize| -> Result<f64> {
            let raw = field(k);
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(IngestError::MalformedRow {
                    line,
                    column: names[k].to_string(),
                    value: raw.to_string(),
                }),
            }
        };
        let int = |k: usize| -> Result<i64> {
            let raw = field(k);
            raw.parse::<i64>().map_err(|_| IngestError::MalformedRow {
                line,
                column: names[k].to_string(),
                value: raw.to_string(),
            })
        };
        let sample = TrackSample {
            frame: int(0)?,
            track_id: int(1)?,
            x: float(2)?,
            y: float(3)?,
            width: float(4)?,
            height: float(5)?,
            x_velocity: float(6)?,
            y_velocity: float(7)?,
            x_acceleration: float(8)?,
            y_acceleration: float(9)?,
            preceding_x_velocity: float(10)?,
            lane_id: int(11)?,
        };
        validate_sample(&sample, line)?;
        by_track.entry(sample.track_id).or_default().push(sample);
    }

    let mut tracks = Vec::with_capacity(by_track.len());
    for (track_id, mut samples) in by_track {
        samples.sort_by_key(|s| s.frame);
        for pair in samples.windows(2) {
            if pair[1].frame != pair[0].frame + 1 {
                return Err(IngestError::NonContiguousFrames {
                    track_id,
                    expected: pair[0].frame + 1,
                    found: pair[1].frame,
                });
            }
        }
        tracks.push(build_track(track_id, samples));
    }
    Ok(Recording::from_tracks(
        meta.recording_id,
        meta.frame_rate,
        meta.lane_count,
        tracks,
    ))
}

fn validate_sample(s: &TrackSample, line: u64) -> Result<()> {
    let reason = if s.frame < 1 {
        "frame must be >= 1"
    } else if s.track_id < 1 {
        "track id must be >= 1"
    } else if s.lane_id < 1 {
        "lane id must be >= 1"
    } else if s.width <= 0.0 || s.height <= 0.0 {
        "vehicle dimensions must be positive"
    } else {
        return Ok(());
    };
    Err(IngestError::InvalidSample {
        line,
        reason: reason.to_string(),
    })
}

/// Assemble a track from frame-ordered samples, inferring class and direction.
pub fn build_track(track_id: i64, samples: Vec<TrackSample>) -> Track {
    let mut track = Track {
        track_id,
        vehicle_class: VehicleClass::Car,
        direction: Direction::IncreasingX,
        mirrored: false,
        samples,
    };
    track.vehicle_class = VehicleClass::from_length(track.length());
    if track.median_x_velocity() < 0.0 {
        track.direction = Direction::DecreasingX;
    }
    track
}

/// Write a recording back out in the default column layout.
pub fn write_tracks<W: Write>(recording: &Recording, out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(ColumnMap::default().names())?;
    for track in recording.tracks.values() {
        for s in &track.samples {
            writer.write_record([
                s.frame.to_string(),
                s.track_id.to_string(),
                s.x.to_string(),
                s.y.to_string(),
                s.width.to_string(),
                s.height.to_string(),
                s.x_velocity.to_string(),
                s.y_velocity.to_string(),
                s.x_acceleration.to_string(),
                s.y_acceleration.to_string(),
                s.preceding_x_velocity.to_string(),
                s.lane_id.to_string(),
            ])?;
        }
    }
    writer.flush()?;
    Ok(())
}

/// Mirror one track about `axis`, flipping its longitudinal sense.
/// Applying it twice restores the original (up to rounding in `axis - x`).
pub fn mirror_track(track: &Track, axis: f64) -> Track {
    let samples = track
        .samples
        .iter()
        .map(|s| TrackSample {
            x: axis - s.x,
            x_velocity: -s.x_velocity,
            x_acceleration: -s.x_acceleration,
            preceding_x_velocity: -s.preceding_x_velocity,
            ..*s
        })
        .collect();
    Track {
        track_id: track.track_id,
        vehicle_class: track.vehicle_class,
        direction: match track.direction {
            Direction::IncreasingX => Direction::DecreasingX,
            Direction::DecreasingX => Direction::IncreasingX,
        },
        mirrored: !track.mirrored,
        samples,
    }
}

/// Bring every track into the +x travel direction.
///
/// Decreasing-x tracks are mirrored about the largest x in the recording.
pub fn normalize_direction(recording: &Recording) -> Result<Recording> {
    if recording.normalized {
        return Ok(recording.clone());
    }
    let axis = recording
        .tracks
        .values()
        .flat_map(|t| t.samples.iter().map(|s| s.x))
        .fold(f64::NEG_INFINITY, f64::max);
    let axis = if axis.is_finite() { axis } else { 0.0 };

    let mut tracks = BTreeMap::new();
    for (&id, track) in &recording.tracks {
        let median = track.median_x_velocity();
        if median.abs() <= DIRECTION_DEADBAND {
            return Err(IngestError::AmbiguousDirection {
                track_id: id,
                median,
            });
        }
        let track = if track.direction == Direction::DecreasingX {
            mirror_track(track, axis)
        } else {
            track.clone()
        };
        tracks.insert(id, track);
    }
    Ok(Recording {
        tracks,
        normalized: true,
        mirror_axis: Some(axis),
        ..recording.clone()
    })
}
