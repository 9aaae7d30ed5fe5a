//! Multi-night corpora on disk or in memory.

use std::path::Path;

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::night::{generate_night, night_rng, SyntheticNight};
use super::profile::ProfileSet;
use super::SynthError;
use crate::ingest::write_night;
use crate::model::{DatasetSplit, SleepStage, N_CLASSES};

pub const CORPUS_MANIFEST: &str = "corpus.manifest.json";
pub const DEFAULT_NIGHTS: usize = 15;
pub const DEFAULT_EPOCHS_PER_NIGHT: usize = 120;
pub const TEST_NIGHTS: usize = 3;
pub const MIN_NIGHTS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusOptions {
    pub seed: u64,
    pub n_nights: usize,
    pub epochs_per_night: usize,
    pub profiles: ProfileSet,
}

impl CorpusOptions {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            n_nights: DEFAULT_NIGHTS,
            epochs_per_night: DEFAULT_EPOCHS_PER_NIGHT,
            profiles: ProfileSet::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NightEntry {
    pub night_id: String,
    pub start_utc: DateTime<Utc>,
    pub epochs: usize,
    pub frames: usize,
    pub class_counts: [usize; N_CLASSES],
    pub not_detected: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub seed: u64,
    pub epochs_per_night: usize,
    pub nights: Vec<NightEntry>,
    pub split: DatasetSplit,
}

pub fn night_id(i: usize) -> String {
    format!("night_{:02}", i + 1)
}

/// Nights start at 23:00 UTC on consecutive days.
pub fn night_start(i: usize) -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2025, 1, 1, 23, 0, 0).unwrap() + Duration::days(i as i64)
}

/// Three test nights drawn uniformly among sets with no two adjacent.
pub fn choose_test_nights(seed: u64, n_nights: usize) -> Result<Vec<usize>, SynthError> {
    if n_nights < MIN_NIGHTS {
        return Err(SynthError::TooFewNights(n_nights));
    }
    let mut rng = night_rng(seed, "split");
    loop {
        let mut pick: Vec<usize> = Vec::with_capacity(TEST_NIGHTS);
        while pick.len() < TEST_NIGHTS {
            let c = rng.random_range(0..n_nights);
            if !pick.contains(&c) {
                pick.push(c);
            }
        }
        pick.sort_unstable();
        if pick.windows(2).all(|w| w[1] > w[0] + 1) {
            return Ok(pick);
        }
    }
}

pub fn corpus_split(opts: &CorpusOptions) -> Result<DatasetSplit, SynthError> {
    let test = choose_test_nights(opts.seed, opts.n_nights)?;
    let (test_nights, train_nights) = (0..opts.n_nights)
        .map(night_id)
        .enumerate()
        .partition::<Vec<_>, _>(|(i, _)| test.contains(i));
    Ok(DatasetSplit {
        train_nights: train_nights.into_iter().map(|(_, id)| id).collect(),
        test_nights: test_nights.into_iter().map(|(_, id)| id).collect(),
    })
}

fn entry(n: &SyntheticNight) -> NightEntry {
    NightEntry {
        night_id: n.meta.night_id.clone(),
        start_utc: n.meta.start_utc,
        epochs: n.hypnogram.len(),
        frames: n.recording.frames.len(),
        class_counts: n.hypnogram.class_counts(),
        not_detected: n
            .hypnogram
            .stages
            .iter()
            .filter(|s| **s == SleepStage::NotDetected)
            .count(),
    }
}

/// All nights in calendar order, generated in parallel.
pub fn generate_nights(opts: &CorpusOptions) -> Result<Vec<SyntheticNight>, SynthError> {
    if opts.n_nights < MIN_NIGHTS {
        return Err(SynthError::TooFewNights(opts.n_nights));
    }
    (0..opts.n_nights)
        .into_par_iter()
        .map(|i| {
            generate_night(
                opts.seed,
                &night_id(i),
                night_start(i),
                opts.epochs_per_night,
                &opts.profiles,
            )
        })
        .collect()
}

/// Writes one directory per night plus the corpus manifest.
pub fn generate_corpus(dir: &Path, opts: &CorpusOptions) -> Result<CorpusManifest, SynthError> {
    let split = corpus_split(opts)?;
    std::fs::create_dir_all(dir).map_err(|e| SynthError::Io(dir.display().to_string(), e))?;
    let nights = (0..opts.n_nights)
        .into_par_iter()
        .map(|i| {
            let id = night_id(i);
            let n = generate_night(opts.seed, &id, night_start(i), opts.epochs_per_night, &opts.profiles)?;
            write_night(&dir.join(&id), &n.meta, &n.recording.frames, &n.labels)?;
            Ok(entry(&n))
        })
        .collect::<Result<Vec<_>, SynthError>>()?;
    let manifest = CorpusManifest {
        seed: opts.seed,
        epochs_per_night: opts.epochs_per_night,
        nights,
        split,
    };
    let path = dir.join(CORPUS_MANIFEST);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, text + "\n").map_err(|e| SynthError::Io(path.display().to_string(), e))?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<CorpusManifest, SynthError> {
    let path = dir.join(CORPUS_MANIFEST);
    let text = std::fs::read_to_string(&path).map_err(|e| SynthError::Io(path.display().to_string(), e))?;
    serde_json::from_str(&text).map_err(|e| SynthError::Manifest(e.to_string()))
}
