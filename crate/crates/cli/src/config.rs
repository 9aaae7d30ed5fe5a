//! Run configuration: an optional JSON file merged under command-line flags.

use std::path::{Path, PathBuf};

use ossmm_core::ml::cv::DEFAULT_FOLDS;
use ossmm_core::ml::{default_grid, ClassifierConfig};
use ossmm_core::stream::ModulationPolicy;
use ossmm_core::DatasetSplit;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const DEFAULT_SEED: u64 = 42;

/// JSON form of a run configuration. Every key is optional and unknown
/// keys are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub corpus: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub k_folds: Option<usize>,
    /// Candidate configurations for cross-validation.
    pub grid: Option<Vec<ClassifierConfig>>,
    /// Replaces the split recorded in the corpus manifest.
    pub split: Option<DatasetSplit>,
    pub policy: Option<ModulationPolicy>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(CliError::missing(path, "--config <json>"));
            }
            Err(e) => return Err(anyhow::anyhow!("{}: {e}", path.display()).into()),
        };
        serde_json::from_str(&text).map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))
    }
}

/// Flag values that may override the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub corpus: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub k_folds: Option<usize>,
}

/// Fully resolved and validated settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub corpus: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub k_folds: usize,
    pub grid: Vec<ClassifierConfig>,
    pub split: Option<DatasetSplit>,
    pub policy: ModulationPolicy,
}

impl Settings {
    pub fn resolve(file: RunConfig, flags: Overrides) -> Result<Self, CliError> {
        let seed = flags.seed.or(file.seed).unwrap_or(DEFAULT_SEED);
        let s = Settings {
            corpus: flags.corpus.or(file.corpus),
            out: flags.out.or(file.out),
            seed,
            k_folds: flags.k_folds.or(file.k_folds).unwrap_or(DEFAULT_FOLDS),
            grid: file.grid.unwrap_or_else(|| default_grid(seed)),
            split: file.split,
            policy: file.policy.unwrap_or_default(),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.k_folds < 2 {
            return Err(CliError::invalid(format!("k_folds must be at least 2, got {}", self.k_folds)));
        }
        if self.grid.is_empty() {
            return Err(CliError::invalid("config grid is empty"));
        }
        for cfg in &self.grid {
            cfg.validate()?;
        }
        if let Some(split) = &self.split {
            if split.train_nights.is_empty() || split.test_nights.is_empty() {
                return Err(CliError::invalid("split needs at least one train and one test night"));
            }
            if let Some(n) = split.test_nights.iter().find(|n| split.train_nights.contains(n)) {
                return Err(CliError::invalid(format!("night {n} is in both train and test")));
            }
        }
        let p = &self.policy;
        if p.consecutive_required == 0 || !p.target_stage.is_trainable() {
            return Err(CliError::invalid(
                "policy needs consecutive_required >= 1 and a classifier stage",
            ));
        }
        Ok(())
    }

    pub fn corpus(&self) -> Result<&Path, CliError> {
        self.corpus
            .as_deref()
            .ok_or_else(|| CliError::invalid("no corpus directory; pass --corpus or set \"corpus\""))
    }

    pub fn out(&self) -> Result<&Path, CliError> {
        self.out
            .as_deref()
            .ok_or_else(|| CliError::invalid("no output directory; pass --out or set \"out\""))
    }
}
