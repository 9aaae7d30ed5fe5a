//! Gradient-boosted trees on the multiclass softmax log-loss. Each stage
//! fits one Newton-step regression tree per class.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::BoostParams;
use super::forest::seed_schedule;
use super::tree::{grow, Columns, FeatureSampling, GrowParams, Newton, Tree};

/// Hessians are floored here so a near-certain row cannot divide by zero.
const MIN_HESSIAN: f64 = 1e-16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedTrees {
    pub n_classes: usize,
    pub n_features: usize,
    /// `stages[s][k]` is the tree for class `k` at stage `s`.
    pub stages: Vec<Vec<Tree>>,
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

impl BoostedTrees {
    pub fn fit(x: &Columns, y: &[usize], n_classes: usize, p: &BoostParams, seed: u64) -> Self {
        let n = x.n_rows;
        let d = x.n_features();
        let n_rows_stage = ((p.subsample * n as f64).round() as usize).clamp(1, n);
        let n_cols_tree = ((p.colsample * d as f64).round() as usize).clamp(1, d);
        let mut margin = vec![vec![0.0; n_classes]; n];
        let mut stages = Vec::with_capacity(p.n_estimators);
        for stage_seed in seed_schedule(seed, p.n_estimators) {
            let mut rng = ChaCha8Rng::seed_from_u64(stage_seed);
            let mut weights = vec![0.0; n];
            for i in sample(&mut rng, n, n_rows_stage) {
                weights[i] = 1.0;
            }
            let prob: Vec<Vec<f64>> = margin.iter().map(|z| softmax(z)).collect();
            let tree_seeds = seed_schedule(stage_seed, n_classes);
            let trees: Vec<Tree> = (0..n_classes)
                .into_par_iter()
                .map(|k| {
                    let mut rng = ChaCha8Rng::seed_from_u64(tree_seeds[k]);
                    let mut cols = sample(&mut rng, d, n_cols_tree).into_vec();
                    cols.sort_unstable();
                    let grad: Vec<f64> = (0..n)
                        .map(|i| prob[i][k] - f64::from(u8::from(y[i] == k)))
                        .collect();
                    let hess: Vec<f64> = (0..n)
                        .map(|i| (2.0 * prob[i][k] * (1.0 - prob[i][k])).max(MIN_HESSIAN))
                        .collect();
                    let crit = Newton {
                        grad: &grad,
                        hess: &hess,
                        lambda: p.lambda,
                        min_child_weight: p.min_child_weight,
                        shrinkage: p.learning_rate,
                    };
                    let params = GrowParams {
                        max_depth: Some(p.max_depth),
                        min_samples_split: 2.0,
                        features: FeatureSampling::Fixed(cols),
                    };
                    grow(x, &weights, &crit, &params, &mut rng)
                })
                .collect();
            for (i, z) in margin.iter_mut().enumerate() {
                let row: Vec<f64> = x.cols.iter().map(|c| c[i]).collect();
                for (zk, t) in z.iter_mut().zip(&trees) {
                    *zk += t.leaf_value(&row)[0];
                }
            }
            stages.push(trees);
        }
        Self {
            n_classes,
            n_features: d,
            stages,
        }
    }

    pub fn margins(&self, x: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; self.n_classes];
        for stage in &self.stages {
            for (zk, t) in z.iter_mut().zip(stage) {
                *zk += t.leaf_value(x)[0];
            }
        }
        z
    }

    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        softmax(&self.margins(x))
    }

    /// Total split gain per feature averaged over all trees.
    pub fn raw_importance(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.n_features];
        let mut count = 0usize;
        for t in self.stages.iter().flatten() {
            count += 1;
            for (a, g) in acc.iter_mut().zip(t.feature_gains(self.n_features)) {
                *a += g;
            }
        }
        let k = count.max(1) as f64;
        acc.iter_mut().for_each(|a| *a /= k);
        acc
    }
}
