//! Reading headband recordings and reference labels, and time-locking the
//! frames to 30-second labeled epochs.
//!
//! On disk a night lives in its own directory:
//!
//! ```text
//! <night>/night.meta.json   {"night_id": "...", "start_utc": "..."}
//! <night>/frames.csv        t_ms,eog,ppg,ax,ay,az,gx,gy,gz
//! <night>/labels.json       [{"start": "...", "stage": "..."}, ...]
//! ```

use std::borrow::Cow;
use std::collections::BTreeSet;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::ops::{Add, AddAssign};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    qualifies, EpochWindow, LabeledEpoch, NightRecording, SensorFrame, SleepStage, ADC_MAX,
    EPOCH_MS, FS_HZ,
};

pub const FRAMES_HEADER: [&str; 9] = ["t_ms", "eog", "ppg", "ax", "ay", "az", "gx", "gy", "gz"];
pub const FRAMES_FILE: &str = "frames.csv";
pub const LABELS_FILE: &str = "labels.json";
pub const META_FILE: &str = "night.meta.json";

/// Offset added to signed IMU words before transmission.
pub const IMU_BASELINE: i32 = 32_768;

/// Allowed deviation of label spacing from 30 s before a warning is raised.
pub const LABEL_SPACING_TOLERANCE_MS: i64 = 2_000;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("wrong frames header: expected `{}`, found `{found}`", FRAMES_HEADER.join(","))]
    WrongHeader { found: String },
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("timestamp goes backwards at line {line}")]
    NonMonotonicTimestamp { line: u64 },
    #[error("night {0} appears more than once")]
    DuplicateNight(String),
    #[error("sampling rate must be {FS_HZ} Hz, got {0}")]
    WrongSampleRate(u32),
    #[error("label {index}: unknown stage {text:?}")]
    UnknownLabel { index: usize, text: String },
    #[error("label {index}: start time repeats a previous label")]
    NonMonotonicLabels { index: usize },
    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("recording and labels share no time span")]
    NoOverlap,
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> IngestError + '_ {
    move |source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Signed IMU count from the baseline-shifted transmitted word.
pub fn decode_imu(raw: u16) -> i32 {
    i32::from(raw) - IMU_BASELINE
}

/// Inverse of [`decode_imu`]; values outside the 16-bit range saturate.
pub fn encode_imu(value: i32) -> u16 {
    (value + IMU_BASELINE).clamp(0, i32::from(u16::MAX)) as u16
}

/// Sidecar describing one night.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NightMeta {
    pub night_id: String,
    pub start_utc: DateTime<Utc>,
    #[serde(default = "default_fs", skip_serializing_if = "is_default_fs")]
    pub fs_hz: u32,
}

fn default_fs() -> u32 {
    FS_HZ
}

fn is_default_fs(fs: &u32) -> bool {
    *fs == FS_HZ
}

impl NightMeta {
    pub fn new(night_id: impl Into<String>, start_utc: DateTime<Utc>) -> Self {
        Self {
            night_id: night_id.into(),
            start_utc,
            fs_hz: FS_HZ,
        }
    }
}

pub fn read_meta(path: &Path) -> Result<NightMeta, IngestError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let meta: NightMeta = serde_json::from_str(&text).map_err(|source| IngestError::Json {
        context: path.display().to_string(),
        source,
    })?;
    if meta.fs_hz != FS_HZ {
        return Err(IngestError::WrongSampleRate(meta.fs_hz));
    }
    Ok(meta)
}

fn parse_field<T: std::str::FromStr>(raw: &[u8], name: &str, line: u64) -> Result<T, IngestError> {
    std::str::from_utf8(raw)
        .ok()
        .and_then(|s| s.trim().parse::<T>().ok())
        .ok_or_else(|| IngestError::MalformedRow {
            line,
            reason: format!("field {name} = {:?}", String::from_utf8_lossy(raw)),
        })
}

fn parse_adc(raw: &[u8], name: &str, line: u64) -> Result<u16, IngestError> {
    let v: u16 = parse_field(raw, name, line)?;
    if v > ADC_MAX {
        return Err(IngestError::MalformedRow {
            line,
            reason: format!("{name} = {v} exceeds the 10-bit range"),
        });
    }
    Ok(v)
}

/// Parses a frames CSV stream. Line numbers in errors are 1-based and count
/// the header.
pub fn read_frames<R: Read>(reader: R) -> Result<Vec<SensorFrame>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut record = csv::ByteRecord::new();
    let mut frames = Vec::new();
    let mut line: u64 = 0;
    let mut last_t: Option<u64> = None;
    loop {
        match rdr.read_byte_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => {
                return Err(IngestError::MalformedRow {
                    line: line + 1,
                    reason: e.to_string(),
                })
            }
        }
        line += 1;
        if line == 1 {
            let found: Vec<String> = record
                .iter()
                .map(|f| String::from_utf8_lossy(f).trim().to_string())
                .collect();
            if found != FRAMES_HEADER {
                return Err(IngestError::WrongHeader {
                    found: found.join(","),
                });
            }
            continue;
        }
        if record.len() != FRAMES_HEADER.len() {
            return Err(IngestError::MalformedRow {
                line,
                reason: format!("expected 9 fields, found {}", record.len()),
            });
        }
        let t_ms: u64 = parse_field(&record[0], "t_ms", line)?;
        let frame = SensorFrame {
            t_ms,
            eog: parse_adc(&record[1], "eog", line)?,
            ppg: parse_adc(&record[2], "ppg", line)?,
            ax: parse_field(&record[3], "ax", line)?,
            ay: parse_field(&record[4], "ay", line)?,
            az: parse_field(&record[5], "az", line)?,
            gx: parse_field(&record[6], "gx", line)?,
            gy: parse_field(&record[7], "gy", line)?,
            gz: parse_field(&record[8], "gz", line)?,
        };
        if last_t.is_some_and(|prev| t_ms < prev) {
            return Err(IngestError::NonMonotonicTimestamp { line });
        }
        last_t = Some(t_ms);
        frames.push(frame);
    }
    if line == 0 {
        return Err(IngestError::WrongHeader {
            found: String::new(),
        });
    }
    Ok(frames)
}

pub fn parse_frames_csv(path: &Path, meta: &NightMeta) -> Result<NightRecording, IngestError> {
    if meta.fs_hz != FS_HZ {
        return Err(IngestError::WrongSampleRate(meta.fs_hz));
    }
    let file = File::open(path).map_err(io_err(path))?;
    let frames = read_frames(BufReader::with_capacity(1 << 20, file))?;
    Ok(NightRecording {
        night_id: meta.night_id.clone(),
        start_utc: meta.start_utc,
        frames,
    })
}

pub fn write_frames<W: Write>(writer: W, frames: &[SensorFrame]) -> io::Result<()> {
    let mut w = BufWriter::with_capacity(1 << 20, writer);
    writeln!(w, "{}", FRAMES_HEADER.join(","))?;
    for f in frames {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            f.t_ms, f.eog, f.ppg, f.ax, f.ay, f.az, f.gx, f.gy, f.gz
        )?;
    }
    w.flush()
}

/// One reference label as stored in the labels file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRecord {
    #[serde(rename = "start")]
    pub start_utc: DateTime<Utc>,
    #[serde(rename = "stage")]
    pub stage_text: String,
}

impl LabelRecord {
    pub fn new(start_utc: DateTime<Utc>, stage: SleepStage) -> Self {
        Self {
            start_utc,
            stage_text: stage.as_label().to_string(),
        }
    }

    pub fn stage(&self) -> Result<SleepStage, crate::model::ModelError> {
        SleepStage::from_label(&self.stage_text)
    }
}

/// Validated, chronologically sorted labels plus spacing warnings.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedLabels {
    pub records: Vec<LabelRecord>,
    pub stages: Vec<SleepStage>,
    pub warnings: Vec<String>,
}

/// Validates and sorts label records. Equal start times are rejected;
/// spacing outside 30 ± 2 s only produces a warning.
pub fn validate_labels(mut records: Vec<LabelRecord>) -> Result<ParsedLabels, IngestError> {
    for (index, r) in records.iter().enumerate() {
        if r.stage().is_err() {
            return Err(IngestError::UnknownLabel {
                index,
                text: r.stage_text.clone(),
            });
        }
    }
    records.sort_by_key(|r| r.start_utc);
    let mut warnings = Vec::new();
    for (i, pair) in records.windows(2).enumerate() {
        let gap = (pair[1].start_utc - pair[0].start_utc).num_milliseconds();
        if gap == 0 {
            return Err(IngestError::NonMonotonicLabels { index: i + 1 });
        }
        if (gap - EPOCH_MS).abs() > LABEL_SPACING_TOLERANCE_MS {
            let msg = format!(
                "labels {} and {} are {:.1} s apart",
                i,
                i + 1,
                gap as f64 / 1000.0
            );
            log::warn!("{msg}");
            warnings.push(msg);
        }
    }
    let stages = records
        .iter()
        .map(|r| r.stage().expect("validated above"))
        .collect();
    Ok(ParsedLabels {
        records,
        stages,
        warnings,
    })
}

pub fn read_labels<R: Read>(reader: R, context: &str) -> Result<ParsedLabels, IngestError> {
    let records: Vec<LabelRecord> =
        serde_json::from_reader(reader).map_err(|source| IngestError::Json {
            context: context.to_string(),
            source,
        })?;
    validate_labels(records)
}

pub fn parse_labels_json(path: &Path) -> Result<ParsedLabels, IngestError> {
    let file = File::open(path).map_err(io_err(path))?;
    read_labels(BufReader::new(file), &path.display().to_string())
}

/// Per-run epoch bookkeeping. `labels_total` always equals the sum of the
/// three disposition counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub nights: usize,
    pub labels_total: usize,
    pub epochs_qualified: usize,
    pub excluded_short: usize,
    pub excluded_not_detected: usize,
}

/// What happened to one reference label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Disposition {
    Qualified,
    ExcludedShort,
    ExcludedNotDetected,
}

impl IngestSummary {
    /// Classifies one label and updates the counters. `Not Detected` takes
    /// precedence over a short sample count.
    pub fn record(&mut self, sample_count: usize, stage: SleepStage) -> Disposition {
        self.labels_total += 1;
        let d = if stage == SleepStage::NotDetected {
            self.excluded_not_detected += 1;
            Disposition::ExcludedNotDetected
        } else if qualifies(sample_count, stage) {
            self.epochs_qualified += 1;
            Disposition::Qualified
        } else {
            self.excluded_short += 1;
            Disposition::ExcludedShort
        };
        debug_assert!(self.reconciles());
        d
    }

    pub fn reconciles(&self) -> bool {
        self.labels_total
            == self.epochs_qualified + self.excluded_short + self.excluded_not_detected
    }
}

impl AddAssign for IngestSummary {
    fn add_assign(&mut self, rhs: Self) {
        self.nights += rhs.nights;
        self.labels_total += rhs.labels_total;
        self.epochs_qualified += rhs.epochs_qualified;
        self.excluded_short += rhs.excluded_short;
        self.excluded_not_detected += rhs.excluded_not_detected;
    }
}

impl Add for IngestSummary {
    type Output = Self;

    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

impl std::iter::Sum for IngestSummary {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), Add::add)
    }
}

/// Label windows in recording time. Each label owns `[t0, t0 + 30 s)`,
/// cut short at the next label's start so windows never overlap.
pub fn label_windows(rec_start: DateTime<Utc>, labels: &[LabelRecord]) -> Vec<EpochWindow> {
    let starts: Vec<i64> = labels
        .iter()
        .map(|l| (l.start_utc - rec_start).num_milliseconds())
        .collect();
    starts
        .iter()
        .enumerate()
        .map(|(i, &t0)| {
            let mut w = EpochWindow::standard(t0);
            if let Some(&next) = starts.get(i + 1) {
                w.end_ms = w.end_ms.min(next);
            }
            w
        })
        .collect()
}

/// Index range of `frames` (sorted by `t_ms`) inside `window`.
pub fn frame_range(frames: &[SensorFrame], window: EpochWindow) -> std::ops::Range<usize> {
    let lo = frames.partition_point(|f| (f.t_ms as i64) < window.t0_ms);
    let hi = frames.partition_point(|f| (f.t_ms as i64) < window.end_ms);
    lo..hi.max(lo)
}

/// Time-locks a recording to its labels.
///
/// Every label spawns one epoch. `Not Detected` epochs are counted and
/// dropped; epochs below 95% of the expected samples are returned with
/// `qualified = false`. `epoch_idx` is the label's position in sorted order.
pub fn align<'a>(
    rec: &'a NightRecording,
    labels: &ParsedLabels,
) -> Result<(Vec<LabeledEpoch<'a>>, IngestSummary), IngestError> {
    let (Some(first), Some(last)) = (rec.frames.first(), rec.frames.last()) else {
        return Err(IngestError::NoOverlap);
    };
    let windows = label_windows(rec.start_utc, &labels.records);
    let (Some(w_first), Some(w_last)) = (windows.first(), windows.last()) else {
        return Err(IngestError::NoOverlap);
    };
    if (last.t_ms as i64) < w_first.t0_ms || (first.t_ms as i64) >= w_last.end_ms {
        return Err(IngestError::NoOverlap);
    }

    let mut summary = IngestSummary {
        nights: 1,
        ..Default::default()
    };
    let mut epochs = Vec::with_capacity(windows.len());
    for (idx, (window, &stage)) in windows.iter().zip(&labels.stages).enumerate() {
        let range = frame_range(&rec.frames, *window);
        let sample_count = range.len();
        match summary.record(sample_count, stage) {
            Disposition::ExcludedNotDetected => continue,
            d => epochs.push(LabeledEpoch {
                night_id: rec.night_id.clone(),
                epoch_idx: idx,
                window: *window,
                stage,
                frames: Cow::Borrowed(&rec.frames[range]),
                sample_count,
                qualified: d == Disposition::Qualified,
            }),
        }
    }
    Ok((epochs, summary))
}

/// A night loaded from its directory.
#[derive(Debug, Clone)]
pub struct LoadedNight {
    pub meta: NightMeta,
    pub recording: NightRecording,
    pub labels: ParsedLabels,
}

pub fn load_night(dir: &Path) -> Result<LoadedNight, IngestError> {
    let meta = read_meta(&dir.join(META_FILE))?;
    let recording = parse_frames_csv(&dir.join(FRAMES_FILE), &meta)?;
    let labels = parse_labels_json(&dir.join(LABELS_FILE))?;
    Ok(LoadedNight {
        meta,
        recording,
        labels,
    })
}

/// Finds every night directory under `corpus` (any subdirectory holding a
/// meta sidecar), sorted by directory name. Two sidecars naming the same
/// night are rejected.
pub fn discover_nights(corpus: &Path) -> Result<Vec<(NightMeta, PathBuf)>, IngestError> {
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(corpus)
        .map_err(io_err(corpus))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(META_FILE).is_file())
        .collect();
    dirs.sort();
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(dirs.len());
    for dir in dirs {
        let meta = read_meta(&dir.join(META_FILE))?;
        if !seen.insert(meta.night_id.clone()) {
            return Err(IngestError::DuplicateNight(meta.night_id));
        }
        out.push((meta, dir));
    }
    Ok(out)
}

/// Writes a night directory in the canonical layout.
pub fn write_night(
    dir: &Path,
    meta: &NightMeta,
    frames: &[SensorFrame],
    labels: &[LabelRecord],
) -> Result<(), IngestError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let meta_path = dir.join(META_FILE);
    let meta_json = serde_json::to_string_pretty(meta).expect("meta serializes");
    std::fs::write(&meta_path, meta_json + "\n").map_err(io_err(&meta_path))?;
    let frames_path = dir.join(FRAMES_FILE);
    let file = File::create(&frames_path).map_err(io_err(&frames_path))?;
    write_frames(file, frames).map_err(io_err(&frames_path))?;
    let labels_path = dir.join(LABELS_FILE);
    let labels_json = serde_json::to_string_pretty(labels).expect("labels serialize");
    std::fs::write(&labels_path, labels_json + "\n").map_err(io_err(&labels_path))?;
    Ok(())
}
