//! Core domain types shared by every stage of the toolkit: the stage
//! vocabulary, raw sensor frames, labeled epochs, feature vectors and
//! evaluation reports.

use std::borrow::Cow;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Sampling rate of every headband channel.
pub const FS_HZ: u32 = 250;
/// Nominal epoch length.
pub const EPOCH_MS: i64 = 30_000;
/// Samples in a complete epoch (30 s at 250 Hz).
pub const EXPECTED_SAMPLES: usize = 7_500;
/// 95% of [`EXPECTED_SAMPLES`]; epochs below this are excluded.
pub const MIN_QUALIFIED_SAMPLES: usize = 7_125;
/// Largest value a 10-bit ADC channel can report.
pub const ADC_MAX: u16 = 1023;
/// Number of classifier classes (`NotDetected` is never trained on).
pub const N_CLASSES: usize = 4;
/// Length of every [`FeatureVector`].
pub const FEATURE_COUNT: usize = 42;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("unknown sleep-stage label {0:?}")]
    UnknownLabel(String),
    #[error("stage {0} has no classifier index")]
    NotTrainable(SleepStage),
    #[error("class index {0} out of range")]
    BadClassIndex(usize),
    #[error("feature vector has {0} values, expected {FEATURE_COUNT}")]
    FeatureLength(usize),
    #[error("feature {name} is not finite ({value})")]
    NonFiniteFeature { name: &'static str, value: f64 },
    #[error("split is invalid: {0}")]
    InvalidSplit(String),
}

/// Reference sleep stage as reported by the bedside monitor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SleepStage {
    Wake,
    LightSleep,
    DeepSleep,
    Rem,
    NotDetected,
}

impl SleepStage {
    pub const ALL: [SleepStage; 5] = [
        SleepStage::Wake,
        SleepStage::LightSleep,
        SleepStage::DeepSleep,
        SleepStage::Rem,
        SleepStage::NotDetected,
    ];

    /// Trainable stages in classifier index order (alphabetical).
    pub const CLASSES: [SleepStage; N_CLASSES] = [
        SleepStage::DeepSleep,
        SleepStage::LightSleep,
        SleepStage::Rem,
        SleepStage::Wake,
    ];

    /// Parses a reference label. Matching ignores case, whitespace and
    /// underscores, so `"Light Sleep"`, `"light_sleep"` and `"LightSleep"`
    /// are all accepted.
    pub fn from_label(text: &str) -> Result<Self, ModelError> {
        let key: String = text
            .chars()
            .filter(|c| !c.is_whitespace() && *c != '_' && *c != '-')
            .flat_map(char::to_lowercase)
            .collect();
        match key.as_str() {
            "wake" => Ok(SleepStage::Wake),
            "lightsleep" => Ok(SleepStage::LightSleep),
            "deepsleep" => Ok(SleepStage::DeepSleep),
            "rem" => Ok(SleepStage::Rem),
            "notdetected" => Ok(SleepStage::NotDetected),
            _ => Err(ModelError::UnknownLabel(text.to_string())),
        }
    }

    /// Canonical label text, as written to label files and CSVs.
    pub fn as_label(self) -> &'static str {
        match self {
            SleepStage::Wake => "Wake",
            SleepStage::LightSleep => "Light Sleep",
            SleepStage::DeepSleep => "Deep Sleep",
            SleepStage::Rem => "REM",
            SleepStage::NotDetected => "Not Detected",
        }
    }

    pub fn class_index(self) -> Result<usize, ModelError> {
        match self {
            SleepStage::DeepSleep => Ok(0),
            SleepStage::LightSleep => Ok(1),
            SleepStage::Rem => Ok(2),
            SleepStage::Wake => Ok(3),
            SleepStage::NotDetected => Err(ModelError::NotTrainable(self)),
        }
    }

    pub fn from_class_index(idx: usize) -> Result<Self, ModelError> {
        Self::CLASSES
            .get(idx)
            .copied()
            .ok_or(ModelError::BadClassIndex(idx))
    }

    pub fn is_trainable(self) -> bool {
        self != SleepStage::NotDetected
    }
}

/// Free-function form of [`SleepStage::from_label`].
pub fn stage_from_label(text: &str) -> Result<SleepStage, ModelError> {
    SleepStage::from_label(text)
}

impl fmt::Display for SleepStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_label())
    }
}

impl FromStr for SleepStage {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::from_label(s)
    }
}

impl Serialize for SleepStage {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_label())
    }
}

impl<'de> Deserialize<'de> for SleepStage {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        SleepStage::from_label(&text).map_err(serde::de::Error::custom)
    }
}

/// One 250 Hz sample from the headband.
///
/// `eog` and `ppg` are 10-bit ADC counts; the six IMU words are the
/// baseline-shifted unsigned form transmitted by the device (see
/// [`crate::ingest::decode_imu`]).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SensorFrame {
    pub t_ms: u64,
    pub eog: u16,
    pub ppg: u16,
    pub ax: u16,
    pub ay: u16,
    pub az: u16,
    pub gx: u16,
    pub gy: u16,
    pub gz: u16,
}

impl SensorFrame {
    pub fn accel(&self) -> [u16; 3] {
        [self.ax, self.ay, self.az]
    }

    pub fn gyro(&self) -> [u16; 3] {
        [self.gx, self.gy, self.gz]
    }
}

/// A full night of frames, sorted by timestamp.
#[derive(Debug, Clone, PartialEq)]
pub struct NightRecording {
    pub night_id: String,
    pub start_utc: chrono::DateTime<chrono::Utc>,
    pub frames: Vec<SensorFrame>,
}

impl NightRecording {
    pub fn fs_hz(&self) -> u32 {
        FS_HZ
    }
}

/// Half-open epoch window `[t0_ms, end_ms)` in recording time. `t0_ms` may
/// be negative when a label starts before the recording does.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpochWindow {
    pub t0_ms: i64,
    pub end_ms: i64,
}

impl EpochWindow {
    pub fn standard(t0_ms: i64) -> Self {
        Self {
            t0_ms,
            end_ms: t0_ms + EPOCH_MS,
        }
    }

    pub fn contains(&self, t_ms: i64) -> bool {
        t_ms >= self.t0_ms && t_ms < self.end_ms
    }
}

/// Thirty seconds of frames bound to one reference label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledEpoch<'a> {
    pub night_id: String,
    pub epoch_idx: usize,
    pub window: EpochWindow,
    pub stage: SleepStage,
    pub frames: Cow<'a, [SensorFrame]>,
    pub sample_count: usize,
    pub qualified: bool,
}

impl LabeledEpoch<'_> {
    pub fn into_owned(self) -> LabeledEpoch<'static> {
        LabeledEpoch {
            night_id: self.night_id,
            epoch_idx: self.epoch_idx,
            window: self.window,
            stage: self.stage,
            frames: Cow::Owned(self.frames.into_owned()),
            sample_count: self.sample_count,
            qualified: self.qualified,
        }
    }
}

/// Qualification rule: at least 95% of the expected samples and a
/// trainable reference label.
pub fn qualifies(sample_count: usize, stage: SleepStage) -> bool {
    sample_count >= MIN_QUALIFIED_SAMPLES && stage.is_trainable()
}

pub fn qualify_epoch(epoch: &LabeledEpoch<'_>) -> bool {
    debug_assert!(epoch.window.end_ms - epoch.window.t0_ms <= EPOCH_MS);
    qualifies(epoch.sample_count, epoch.stage)
}

/// Ordered 42-element feature vector. Names come from
/// [`crate::features::catalog`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self, ModelError> {
        if values.len() != FEATURE_COUNT {
            return Err(ModelError::FeatureLength(values.len()));
        }
        let names = crate::features::catalog::names();
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(ModelError::NonFiniteFeature {
                name: names[i],
                value: *v,
            });
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn names() -> [&'static str; FEATURE_COUNT] {
        crate::features::catalog::names()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        crate::features::catalog::index_of(name).map(|i| self.values[i])
    }
}

/// Night-level train/test split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSplit {
    pub train_nights: Vec<String>,
    pub test_nights: Vec<String>,
}

impl DatasetSplit {
    /// Checks disjointness and that no two test nights are adjacent in
    /// `calendar`, the chronological list of all nights.
    pub fn validate(&self, calendar: &[String]) -> Result<(), ModelError> {
        if let Some(n) = self
            .test_nights
            .iter()
            .find(|n| self.train_nights.contains(n))
        {
            return Err(ModelError::InvalidSplit(format!(
                "night {n} is in both train and test"
            )));
        }
        let mut positions = Vec::with_capacity(self.test_nights.len());
        for n in &self.test_nights {
            let pos = calendar.iter().position(|c| c == n).ok_or_else(|| {
                ModelError::InvalidSplit(format!("test night {n} not in calendar"))
            })?;
            positions.push(pos);
        }
        positions.sort_unstable();
        if positions.windows(2).any(|w| w[1] == w[0] + 1) {
            return Err(ModelError::InvalidSplit(
                "test nights must not be consecutive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub stage: SleepStage,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Baselines {
    /// Accuracy of a predictor sampling from the class distribution, Σp².
    pub stratified_chance: f64,
    /// Accuracy of always predicting the most frequent class.
    pub majority_class: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub name: String,
    pub weight: f64,
}

/// Metrics for one set of predictions. Rows and columns of the confusion
/// matrices follow [`SleepStage::CLASSES`]; rows are true stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub n: usize,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub per_class: Vec<ClassMetrics>,
    pub confusion_counts: [[usize; N_CLASSES]; N_CLASSES],
    pub confusion: [[f64; N_CLASSES]; N_CLASSES],
    /// True stages with no support; their normalized rows are all zero.
    pub empty_rows: Vec<SleepStage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub importances: Option<Vec<FeatureImportance>>,
    pub baselines: Baselines,
}

impl EvaluationReport {
    pub fn confusion_rate(&self, truth: SleepStage, predicted: SleepStage) -> f64 {
        match (truth.class_index(), predicted.class_index()) {
            (Ok(t), Ok(p)) => self.confusion[t][p],
            _ => 0.0,
        }
    }

    /// Importances sorted by descending weight (stable on ties).
    pub fn top_importances(&self, k: usize) -> Vec<FeatureImportance> {
        let mut all = self.importances.clone().unwrap_or_default();
        all.sort_by(|a, b| b.weight.total_cmp(&a.weight));
        all.truncate(k);
        all
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_parsing() {
        assert_eq!(stage_from_label("Light Sleep").unwrap(), SleepStage::LightSleep);
        assert_eq!(stage_from_label("rem").unwrap(), SleepStage::Rem);
        assert_eq!(stage_from_label("  Deep   sleep ").unwrap(), SleepStage::DeepSleep);
        assert_eq!(stage_from_label("Not Detected").unwrap(), SleepStage::NotDetected);
        assert_eq!(
            stage_from_label("Asleep"),
            Err(ModelError::UnknownLabel("Asleep".into()))
        );
        for s in SleepStage::ALL {
            assert_eq!(stage_from_label(s.as_label()).unwrap(), s);
        }
    }

    #[test]
    fn class_order_is_alphabetical() {
        let names: Vec<_> = SleepStage::CLASSES.iter().map(|s| format!("{s:?}")).collect();
        let mut sorted = names.clone();
        sorted.sort();
        assert_eq!(names, sorted);
        for (i, s) in SleepStage::CLASSES.iter().enumerate() {
            assert_eq!(s.class_index().unwrap(), i);
            assert_eq!(SleepStage::from_class_index(i).unwrap(), *s);
        }
        assert!(SleepStage::NotDetected.class_index().is_err());
    }

    fn epoch(sample_count: usize, stage: SleepStage) -> LabeledEpoch<'static> {
        LabeledEpoch {
            night_id: "n".into(),
            epoch_idx: 0,
            window: EpochWindow::standard(0),
            stage,
            frames: Cow::Owned(Vec::new()),
            sample_count,
            qualified: false,
        }
    }

    #[test]
    fn qualification_rule() {
        assert!(qualify_epoch(&epoch(7400, SleepStage::Rem)));
        assert!(!qualify_epoch(&epoch(7000, SleepStage::Wake)));
        assert!(!qualify_epoch(&epoch(7500, SleepStage::NotDetected)));
        assert!(qualify_epoch(&epoch(7125, SleepStage::Wake)));
        assert!(!qualify_epoch(&epoch(7124, SleepStage::Wake)));
        assert_eq!(MIN_QUALIFIED_SAMPLES, EXPECTED_SAMPLES * 95 / 100);
    }

    #[test]
    fn feature_vector_checks() {
        assert_eq!(
            FeatureVector::new(vec![0.0; 41]),
            Err(ModelError::FeatureLength(41))
        );
        let mut v = vec![0.0; FEATURE_COUNT];
        v[3] = f64::NAN;
        assert!(matches!(
            FeatureVector::new(v),
            Err(ModelError::NonFiniteFeature { .. })
        ));
    }

    #[test]
    fn split_rules() {
        let cal: Vec<String> = (1..=6).map(|i| format!("n{i}")).collect();
        let ok = DatasetSplit {
            train_nights: vec!["n1".into(), "n3".into(), "n5".into(), "n6".into()],
            test_nights: vec!["n2".into(), "n4".into()],
        };
        assert!(ok.validate(&cal).is_ok());
        let consecutive = DatasetSplit {
            train_nights: vec!["n1".into()],
            test_nights: vec!["n3".into(), "n4".into()],
        };
        assert!(consecutive.validate(&cal).is_err());
        let overlap = DatasetSplit {
            train_nights: vec!["n2".into()],
            test_nights: vec!["n2".into()],
        };
        assert!(overlap.validate(&cal).is_err());
    }
}
