//! Night-grouped K-fold cross-validation.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ClassifierConfig;
use super::dataset::Dataset;
use super::metrics::evaluate;
use super::{fit_resampled, predict, MlError};

pub const DEFAULT_FOLDS: usize = 6;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train_nights: Vec<String>,
    pub val_nights: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub folds: Vec<Fold>,
}

impl FoldPlan {
    /// Every night validates exactly once and no fold trains on its own
    /// validation nights.
    pub fn validate(&self, nights: &[String]) -> Result<(), MlError> {
        let mut seen = HashSet::new();
        for f in &self.folds {
            for v in &f.val_nights {
                if !seen.insert(v) {
                    return Err(MlError::InvalidPlan(format!("{v} validates twice")));
                }
                if f.train_nights.contains(v) {
                    return Err(MlError::InvalidPlan(format!("{v} is in train and val")));
                }
            }
        }
        if seen.len() != nights.len() || nights.iter().any(|n| !seen.contains(n)) {
            return Err(MlError::InvalidPlan("validation folds do not cover all nights".into()));
        }
        Ok(())
    }
}

/// Shuffles distinct nights with `seed` and deals them into `k` folds as
/// evenly as possible; the first `n mod k` folds get one extra night.
pub fn group_kfold(nights: &[String], k: usize, seed: u64) -> Result<FoldPlan, MlError> {
    let mut uniq: Vec<String> = nights.to_vec();
    uniq.sort();
    uniq.dedup();
    if k < 2 || k > uniq.len() {
        return Err(MlError::TooFewGroups {
            groups: uniq.len(),
            folds: k,
        });
    }
    let mut shuffled = uniq.clone();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (uniq.len() / k, uniq.len() % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for i in 0..k {
        let size = base + usize::from(i < extra);
        let mut val = shuffled[start..start + size].to_vec();
        val.sort();
        start += size;
        let train = uniq.iter().filter(|n| !val.contains(n)).cloned().collect();
        folds.push(Fold {
            train_nights: train,
            val_nights: val,
        });
    }
    Ok(FoldPlan { folds })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub config_index: usize,
    pub fold: usize,
    pub macro_f1: f64,
    pub accuracy: f64,
    pub n_train: usize,
    pub n_synthetic: usize,
    pub n_val: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigSummary {
    pub config_index: usize,
    pub config: ClassifierConfig,
    pub mean_macro_f1: f64,
    pub std_macro_f1: f64,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResults {
    pub plan: FoldPlan,
    pub folds: Vec<FoldResult>,
    pub summaries: Vec<ConfigSummary>,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len().max(1) as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n).sqrt())
}

/// Seed for SMOTE in fold `i`.
pub fn fold_seed(seed: u64, fold: usize) -> u64 {
    seed ^ (0x9E37_79B9_7F4A_7C15u64.wrapping_mul(fold as u64 + 1))
}

/// Rows seen by resampling or fitting must not share a
/// `(night, epoch)` key with any validation row.
pub fn leakage_guard(data: &Dataset, train: &[usize], val: &[usize]) -> Result<(), MlError> {
    let held_out: HashSet<(&str, usize)> = val
        .iter()
        .map(|&i| (data.night[i].as_str(), data.epoch_idx[i]))
        .collect();
    match train
        .iter()
        .find(|&&i| held_out.contains(&(data.night[i].as_str(), data.epoch_idx[i])))
    {
        Some(&i) => Err(MlError::Leakage {
            night_id: data.night[i].clone(),
            epoch_idx: data.epoch_idx[i],
        }),
        None => Ok(()),
    }
}

pub fn run_cv(
    data: &Dataset,
    configs: &[ClassifierConfig],
    k: usize,
    seed: u64,
) -> Result<CvResults, MlError> {
    let plan = group_kfold(&data.nights(), k, seed)?;
    plan.validate(&data.nights())?;
    run_cv_with_plan(data, configs, &plan, seed)
}

/// Runs a given plan as is; only the leakage guard protects it.
pub fn run_cv_with_plan(
    data: &Dataset,
    configs: &[ClassifierConfig],
    plan: &FoldPlan,
    seed: u64,
) -> Result<CvResults, MlError> {
    data.check()?;
    let mut folds = Vec::new();
    for (fi, fold) in plan.folds.iter().enumerate() {
        let train = data.rows_of(&fold.train_nights);
        let val = data.rows_of(&fold.val_nights);
        leakage_guard(data, &train, &val)?;
        let tr = data.subset(&train);
        let va = data.subset(&val);
        let results: Vec<Result<FoldResult, MlError>> = configs
            .par_iter()
            .enumerate()
            .map(|(ci, cfg)| {
                let model = fit_resampled(cfg, &tr.x, &tr.y, fold_seed(seed, fi))?;
                let pred = predict(&model, &va.x)?;
                let report = evaluate(&va.y, &pred)?;
                Ok(FoldResult {
                    config_index: ci,
                    fold: fi,
                    macro_f1: report.macro_f1,
                    accuracy: report.accuracy,
                    n_train: tr.len(),
                    n_synthetic: model.meta.smote_added.iter().sum(),
                    n_val: va.len(),
                })
            })
            .collect();
        for r in results {
            folds.push(r?);
        }
    }
    folds.sort_by_key(|r| (r.config_index, r.fold));
    let summaries = configs
        .iter()
        .enumerate()
        .map(|(ci, cfg)| {
            let f1: Vec<f64> = folds.iter().filter(|r| r.config_index == ci).map(|r| r.macro_f1).collect();
            let acc: Vec<f64> = folds.iter().filter(|r| r.config_index == ci).map(|r| r.accuracy).collect();
            let (mean_macro_f1, std_macro_f1) = mean_std(&f1);
            let (mean_accuracy, std_accuracy) = mean_std(&acc);
            ConfigSummary {
                config_index: ci,
                config: *cfg,
                mean_macro_f1,
                std_macro_f1,
                mean_accuracy,
                std_accuracy,
            }
        })
        .collect();
    Ok(CvResults {
        plan: plan.clone(),
        folds,
        summaries,
    })
}
