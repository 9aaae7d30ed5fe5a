//! Epoch feature extraction: 8 pulse, 12 motion and 22 EOG features in
//! catalog order.

pub mod catalog;
pub mod eog;
pub mod imu;
pub mod pulse;

use std::borrow::Cow;
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::decode_imu;
use crate::model::{
    FeatureVector, LabeledEpoch, ModelError, SensorFrame, SleepStage, FEATURE_COUNT, FS_HZ,
};

pub use catalog::{catalog_json, index_of, names, FeatureSpec, CATALOG};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("epoch {epoch_idx} of {night_id} is not qualified for feature extraction")]
    UnqualifiedEpoch { night_id: String, epoch_idx: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("features CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("features CSV header does not match the feature catalog")]
    WrongHeader,
    #[error("features CSV line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
}

/// Per-channel sample arrays for one epoch, IMU decoded to signed counts.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EpochSignals {
    pub eog: Vec<f64>,
    pub ppg: Vec<f64>,
    pub accel: [Vec<f64>; 3],
    pub gyro: [Vec<f64>; 3],
}

impl EpochSignals {
    /// Frames are put in canonical order first, so frames sharing a
    /// timestamp give the same signals whatever order they arrived in.
    pub fn from_frames(frames: &[SensorFrame]) -> Self {
        let frames: Cow<[SensorFrame]> = if frames.windows(2).all(|w| w[0] <= w[1]) {
            Cow::Borrowed(frames)
        } else {
            let mut v = frames.to_vec();
            v.sort();
            Cow::Owned(v)
        };
        let n = frames.len();
        let mut s = EpochSignals {
            eog: Vec::with_capacity(n),
            ppg: Vec::with_capacity(n),
            ..Default::default()
        };
        for f in frames.iter() {
            s.eog.push(f.eog as f64);
            s.ppg.push(f.ppg as f64);
            for (axis, &raw) in s.accel.iter_mut().zip(&f.accel()) {
                axis.push(decode_imu(raw) as f64);
            }
            for (axis, &raw) in s.gyro.iter_mut().zip(&f.gyro()) {
                axis.push(decode_imu(raw) as f64);
            }
        }
        s
    }
}

fn refs(x: &[Vec<f64>; 3]) -> [&[f64]; 3] {
    [&x[0], &x[1], &x[2]]
}

/// The 42 features of a set of signals, in catalog order.
pub fn features_from_signals(s: &EpochSignals, fs_hz: f64) -> Result<FeatureVector, ModelError> {
    let mut values = Vec::with_capacity(FEATURE_COUNT);
    values.extend(pulse::pulse_features(&s.ppg, fs_hz).to_array());
    values.extend(imu::imu_features(refs(&s.accel), refs(&s.gyro), fs_hz).to_array());
    values.extend(eog::eog_features(&s.eog, fs_hz).to_array());
    FeatureVector::new(values)
}

/// Features of raw frames, without any qualification check.
pub fn extract_frames(frames: &[SensorFrame]) -> Result<FeatureVector, ModelError> {
    features_from_signals(&EpochSignals::from_frames(frames), FS_HZ as f64)
}

/// Features of one labeled epoch. Unqualified epochs are rejected.
pub fn extract_epoch(epoch: &LabeledEpoch<'_>) -> Result<FeatureVector, FeatureError> {
    if !epoch.qualified {
        return Err(FeatureError::UnqualifiedEpoch {
            night_id: epoch.night_id.clone(),
            epoch_idx: epoch.epoch_idx,
        });
    }
    Ok(extract_frames(&epoch.frames)?)
}

/// One row of the features table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub night_id: String,
    pub epoch_idx: usize,
    pub stage: SleepStage,
    pub features: FeatureVector,
}

/// Extracts every qualified epoch in parallel; order follows the input.
pub fn extract_all(epochs: &[LabeledEpoch<'_>]) -> Result<Vec<FeatureRow>, FeatureError> {
    epochs
        .par_iter()
        .filter(|e| e.qualified)
        .map(|e| {
            Ok(FeatureRow {
                night_id: e.night_id.clone(),
                epoch_idx: e.epoch_idx,
                stage: e.stage,
                features: extract_epoch(e)?,
            })
        })
        .collect()
}

const KEY_COLUMNS: [&str; 3] = ["night_id", "epoch_idx", "stage"];

pub fn csv_header() -> Vec<&'static str> {
    KEY_COLUMNS.iter().copied().chain(names()).collect()
}

/// Writes rows with full round-trip float precision.
pub fn write_features_csv<W: Write>(w: W, rows: &[FeatureRow]) -> Result<(), FeatureError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(csv_header())?;
    for r in rows {
        let mut rec: Vec<String> = vec![
            r.night_id.clone(),
            r.epoch_idx.to_string(),
            r.stage.as_label().to_string(),
        ];
        rec.extend(r.features.values().iter().map(|v| v.to_string()));
        out.write_record(&rec)?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_features_csv<R: Read>(r: R) -> Result<Vec<FeatureRow>, FeatureError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let header = rdr.headers()?.clone();
    if header.iter().ne(csv_header()) {
        return Err(FeatureError::WrongHeader);
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i as u64 + 2;
        let rec = rec?;
        let bad = |reason: String| FeatureError::MalformedRow { line, reason };
        let epoch_idx = rec[1]
            .parse::<usize>()
            .map_err(|e| bad(format!("epoch_idx: {e}")))?;
        let stage = SleepStage::from_label(&rec[2]).map_err(|e| bad(e.to_string()))?;
        let values = rec
            .iter()
            .skip(KEY_COLUMNS.len())
            .map(|v| v.parse::<f64>().map_err(|e| bad(format!("{v:?}: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(FeatureRow {
            night_id: rec[0].to_string(),
            epoch_idx,
            stage,
            features: FeatureVector::new(values).map_err(|e| bad(e.to_string()))?,
        });
    }
    Ok(rows)
}

/// Smallest standard deviation used when scaling a column.
pub const STD_FLOOR: f64 = 1e-9;

/// Per-column `(x - mean) / std`, fit on training rows only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let d = rows.first().map_or(0, Vec::len);
        let n = rows.len().max(1) as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var.iter().map(|s| (s / n).sqrt().max(STD_FLOOR)).collect();
        Self { mean, std }
    }

    pub fn apply_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn apply(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.apply_row(r)).collect()
    }
}

pub fn standardize_fit(rows: &[Vec<f64>]) -> Standardizer {
    Standardizer::fit(rows)
}

pub fn standardize_apply(s: &Standardizer, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    s.apply(rows)
}
