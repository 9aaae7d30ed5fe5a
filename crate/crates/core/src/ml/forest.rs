//! Random forest: bootstrap-weighted Gini trees, soft voting.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ForestParams;
use super::tree::{grow, Columns, FeatureSampling, Gini, GrowParams, Tree};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub n_classes: usize,
    pub n_features: usize,
    pub trees: Vec<Tree>,
}

/// Per-tree seeds drawn up front, so parallel fitting matches serial.
pub fn seed_schedule(seed: u64, n: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random()).collect()
}

impl RandomForest {
    pub fn fit(x: &Columns, y: &[usize], n_classes: usize, p: &ForestParams, seed: u64) -> Self {
        let n = x.n_rows;
        let grow_params = GrowParams {
            max_depth: p.max_depth,
            min_samples_split: p.min_samples_split as f64,
            features: FeatureSampling::PerNode(p.max_features.resolve(x.n_features())),
        };
        let crit = Gini {
            y,
            n_classes,
            min_samples_leaf: p.min_samples_leaf as f64,
        };
        let trees = seed_schedule(seed, p.n_estimators)
            .into_par_iter()
            .map(|s| {
                let mut rng = ChaCha8Rng::seed_from_u64(s);
                let weights = if p.bootstrap {
                    let mut w = vec![0.0; n];
                    for _ in 0..n {
                        w[rng.random_range(0..n)] += 1.0;
                    }
                    w
                } else {
                    vec![1.0; n]
                };
                grow(x, &weights, &crit, &grow_params, &mut rng)
            })
            .collect();
        Self {
            n_classes,
            n_features: x.n_features(),
            trees,
        }
    }

    /// Mean of the per-tree leaf class distributions.
    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        let mut acc = vec![0.0; self.n_classes];
        for t in &self.trees {
            for (a, v) in acc.iter_mut().zip(t.leaf_value(x)) {
                *a += v;
            }
        }
        let k = self.trees.len().max(1) as f64;
        acc.iter_mut().for_each(|a| *a /= k);
        acc
    }

    /// Gini decrease per feature, averaged over trees.
    pub fn raw_importance(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.n_features];
        for t in &self.trees {
            for (a, g) in acc.iter_mut().zip(t.feature_gains(self.n_features)) {
                *a += g;
            }
        }
        let k = self.trees.len().max(1) as f64;
        acc.iter_mut().for_each(|a| *a /= k);
        acc
    }
}
