//! Class rebalancing, grouped cross-validation, the three classifiers,
//! metrics and feature importance.

pub mod boost;
pub mod config;
pub mod cv;
pub mod dataset;
pub mod forest;
pub mod metrics;
pub mod select;
pub mod smote;
pub mod svm;
pub mod tree;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{names, Standardizer};
use crate::model::{FeatureImportance, SleepStage, FEATURE_COUNT, N_CLASSES};

pub use boost::BoostedTrees;
pub use config::{
    default_grid, BoostParams, ClassifierConfig, ClassifierKind, ForestParams, Gamma, MaxFeatures,
    ModelParams, SvmParams,
};
pub use cv::{group_kfold, leakage_guard, run_cv, run_cv_with_plan, CvResults, Fold, FoldPlan};
pub use dataset::Dataset;
pub use forest::RandomForest;
pub use metrics::{baselines, class_distribution, evaluate, macro_f1};
pub use select::{select_best, select_config};
pub use smote::{smote, Resampled};
pub use svm::SvmModel;
pub use tree::Columns;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MlError {
    #[error("class {class} has {rows} rows; at least 2 are needed")]
    DegenerateClass { class: usize, rows: usize },
    #[error("{groups} groups cannot fill {folds} folds")]
    TooFewGroups { groups: usize, folds: usize },
    #[error("fold plan is invalid: {0}")]
    InvalidPlan(String),
    #[error("all training rows are identical")]
    SingularData,
    #[error("class {0} has no training rows")]
    MissingClass(usize),
    #[error("class index {0} is out of range")]
    BadClass(usize),
    #[error("expected {expected} values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("no rows to evaluate")]
    EmptyInput,
    #[error("class distribution sums to {0}, not 1")]
    BadDistribution(f64),
    #[error("feature importance is only defined for tree models")]
    UnsupportedModel,
    #[error("no cross-validation results")]
    EmptyResults,
    #[error("invalid classifier configuration: {0}")]
    InvalidConfig(String),
    #[error("validation row {night_id}/{epoch_idx} reached training")]
    Leakage { night_id: String, epoch_idx: usize },
    #[error("model file: {0}")]
    Format(String),
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Fitted {
    RandomForest(RandomForest),
    GradientBoostedTrees(BoostedTrees),
    Svm(SvmModel),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub n_rows: usize,
    pub n_original: usize,
    pub class_counts: Vec<usize>,
    pub smote_added: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub format_version: u32,
    pub config: ClassifierConfig,
    pub class_order: Vec<SleepStage>,
    pub feature_names: Vec<String>,
    /// Present only for SVM, which is fit on standardized features.
    pub standardization: Option<Standardizer>,
    pub meta: TrainingMeta,
    pub fitted: Fitted,
}

fn check_training(x: &[Vec<f64>], y: &[usize]) -> Result<(), MlError> {
    if x.len() != y.len() {
        return Err(MlError::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if let Some(r) = x.iter().find(|r| r.len() != FEATURE_COUNT) {
        return Err(MlError::DimensionMismatch {
            expected: FEATURE_COUNT,
            got: r.len(),
        });
    }
    let mut counts = [0usize; N_CLASSES];
    for &c in y {
        *counts.get_mut(c).ok_or(MlError::BadClass(c))? += 1;
    }
    if let Some(c) = counts.iter().position(|&n| n == 0) {
        return Err(MlError::MissingClass(c));
    }
    if x.iter().all(|r| r == &x[0]) {
        return Err(MlError::SingularData);
    }
    Ok(())
}

/// Fits `config` on exactly the rows given.
pub fn train(config: &ClassifierConfig, x: &[Vec<f64>], y: &[usize]) -> Result<TrainedModel, MlError> {
    config.validate()?;
    check_training(x, y)?;
    let mut counts = vec![0usize; N_CLASSES];
    y.iter().for_each(|&c| counts[c] += 1);
    let mut standardization = None;
    let fitted = match &config.params {
        ModelParams::RandomForest(p) => {
            Fitted::RandomForest(RandomForest::fit(&Columns::from_rows(x), y, N_CLASSES, p, config.seed))
        }
        ModelParams::GradientBoostedTrees(p) => Fitted::GradientBoostedTrees(BoostedTrees::fit(
            &Columns::from_rows(x),
            y,
            N_CLASSES,
            p,
            config.seed,
        )),
        ModelParams::Svm(p) => {
            let s = Standardizer::fit(x);
            let xs = s.apply(x);
            standardization = Some(s);
            Fitted::Svm(SvmModel::fit(&xs, y, N_CLASSES, p))
        }
    };
    Ok(TrainedModel {
        format_version: MODEL_FORMAT_VERSION,
        config: *config,
        class_order: SleepStage::CLASSES.to_vec(),
        feature_names: names().iter().map(|s| s.to_string()).collect(),
        standardization,
        meta: TrainingMeta {
            n_rows: x.len(),
            n_original: x.len(),
            class_counts: counts,
            smote_added: vec![0; N_CLASSES],
        },
        fitted,
    })
}

/// SMOTE, then [`train`] on the balanced rows.
pub fn fit_resampled(
    config: &ClassifierConfig,
    x: &[Vec<f64>],
    y: &[usize],
    smote_seed: u64,
) -> Result<TrainedModel, MlError> {
    let r = smote(x, y, N_CLASSES, smote::DEFAULT_K, smote_seed)?;
    let mut m = train(config, &r.x, &r.y)?;
    m.meta.n_original = r.n_original;
    m.meta.smote_added = r.added;
    let mut counts = vec![0usize; N_CLASSES];
    y.iter().for_each(|&c| counts[c] += 1);
    m.meta.class_counts = counts;
    Ok(m)
}

/// Index of the largest score; the lowest index wins ties.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

impl TrainedModel {
    /// Class scores: vote shares for SVM, probabilities otherwise.
    pub fn scores(&self, x: &[f64]) -> Result<Vec<f64>, MlError> {
        if x.len() != self.feature_names.len() {
            return Err(MlError::DimensionMismatch {
                expected: self.feature_names.len(),
                got: x.len(),
            });
        }
        Ok(match &self.fitted {
            Fitted::RandomForest(f) => f.predict_proba(x),
            Fitted::GradientBoostedTrees(b) => b.predict_proba(x),
            Fitted::Svm(s) => {
                let z = match &self.standardization {
                    Some(st) => st.apply_row(x),
                    None => x.to_vec(),
                };
                s.votes(&z)
            }
        })
    }

    pub fn predict_one(&self, x: &[f64]) -> Result<usize, MlError> {
        Ok(argmax(&self.scores(x)?))
    }

    pub fn to_json(&self) -> Result<String, MlError> {
        serde_json::to_string(self).map_err(|e| MlError::Format(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self, MlError> {
        let m: TrainedModel = serde_json::from_str(text).map_err(|e| MlError::Format(e.to_string()))?;
        if m.format_version != MODEL_FORMAT_VERSION {
            return Err(MlError::Format(format!(
                "unsupported format version {}",
                m.format_version
            )));
        }
        Ok(m)
    }
}

pub fn predict(m: &TrainedModel, x: &[Vec<f64>]) -> Result<Vec<usize>, MlError> {
    x.iter().map(|r| m.predict_one(r)).collect()
}

/// Mean decrease in impurity per feature, normalized to sum to 1.
pub fn mdi_importance(m: &TrainedModel) -> Result<Vec<f64>, MlError> {
    let raw = match &m.fitted {
        Fitted::RandomForest(f) => f.raw_importance(),
        Fitted::GradientBoostedTrees(b) => b.raw_importance(),
        Fitted::Svm(_) => return Err(MlError::UnsupportedModel),
    };
    let total: f64 = raw.iter().sum();
    if total <= 0.0 {
        return Ok(vec![0.0; raw.len()]);
    }
    Ok(raw.iter().map(|v| v / total).collect())
}

/// Importances paired with feature names, in catalog order.
pub fn named_importance(m: &TrainedModel) -> Result<Vec<FeatureImportance>, MlError> {
    Ok(mdi_importance(m)?
        .into_iter()
        .zip(&m.feature_names)
        .map(|(weight, name)| FeatureImportance {
            name: name.clone(),
            weight,
        })
        .collect())
}
