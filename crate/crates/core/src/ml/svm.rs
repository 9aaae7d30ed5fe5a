//! RBF-kernel SVM, one-vs-one, each binary problem solved by SMO with
//! second-order working-set selection.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Gamma, SvmParams};

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySvm {
    pub positive: usize,
    pub negative: usize,
    /// `(support vector index, alpha · y)`.
    pub coef: Vec<(usize, f64)>,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub n_classes: usize,
    pub gamma: f64,
    pub support: Vec<Vec<f64>>,
    pub machines: Vec<BinarySvm>,
}

pub fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

/// `1 / (n_features · var(X))`, the variance pooled over every entry.
pub fn scale_gamma(x: &[Vec<f64>]) -> f64 {
    let d = x.first().map_or(1, Vec::len).max(1);
    let n = (x.len() * d) as f64;
    let mean = x.iter().flatten().sum::<f64>() / n;
    let var = x.iter().flatten().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    if var > 0.0 {
        1.0 / (d as f64 * var)
    } else {
        1.0
    }
}

/// Dual solution of one binary problem: alphas and the offset `rho`, with
/// decision `Σ αᵢ yᵢ K(xᵢ, x) - rho`.
pub fn solve_smo(k: &[Vec<f64>], y: &[f64], c: f64, eps: f64) -> (Vec<f64>, f64) {
    let n = y.len();
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let q = |i: usize, j: usize| y[i] * y[j] * k[i][j];
    let upper = |a: f64| a >= c;
    let lower = |a: f64| a <= 0.0;
    let max_iter = (1000 * n).clamp(10_000, 10_000_000);
    for _ in 0..max_iter {
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = usize::MAX;
        for t in 0..n {
            let v = -y[t] * grad[t];
            let eligible = if y[t] > 0.0 { !upper(alpha[t]) } else { !lower(alpha[t]) };
            if eligible && v >= gmax {
                gmax = v;
                i_sel = t;
            }
        }
        if i_sel == usize::MAX {
            break;
        }
        let i = i_sel;
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_sel = usize::MAX;
        let mut best_obj = f64::INFINITY;
        for t in 0..n {
            let eligible = if y[t] > 0.0 { !lower(alpha[t]) } else { !upper(alpha[t]) };
            if !eligible {
                continue;
            }
            let v = y[t] * grad[t];
            if v >= gmax2 {
                gmax2 = v;
            }
            let grad_diff = gmax + v;
            if grad_diff > 0.0 {
                let quad = k[i][i] + k[t][t] - 2.0 * k[i][t];
                let obj = -(grad_diff * grad_diff) / if quad > 0.0 { quad } else { TAU };
                if obj <= best_obj {
                    best_obj = obj;
                    j_sel = t;
                }
            }
        }
        if gmax + gmax2 < eps || j_sel == usize::MAX {
            break;
        }
        let j = j_sel;
        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let quad = (k[i][i] + k[j][j] + 2.0 * q(i, j)).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (k[i][i] + k[j][j] - 2.0 * q(i, j)).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += q(t, i) * di + q(t, j) * dj;
        }
    }

    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut n_free, mut sum_free) = (0usize, 0.0);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if upper(alpha[t]) {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if lower(alpha[t]) {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 {
        sum_free / n_free as f64
    } else {
        (ub + lb) / 2.0
    };
    (alpha, rho)
}

impl SvmModel {
    /// `x` must already be standardized.
    pub fn fit(x: &[Vec<f64>], y: &[usize], n_classes: usize, p: &SvmParams) -> Self {
        let gamma = match p.gamma {
            Gamma::Value(g) => g,
            Gamma::Named(_) => scale_gamma(x),
        };
        let pairs: Vec<(usize, usize)> = (0..n_classes)
            .flat_map(|a| (a + 1..n_classes).map(move |b| (a, b)))
            .collect();
        let solved: Vec<(usize, usize, Vec<usize>, Vec<f64>, f64)> = pairs
            .iter()
            .map(|&(a, b)| {
                let idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == a || y[i] == b).collect();
                let labels: Vec<f64> = idx.iter().map(|&i| if y[i] == a { 1.0 } else { -1.0 }).collect();
                let kern: Vec<Vec<f64>> = idx
                    .par_iter()
                    .map(|&i| idx.iter().map(|&j| rbf(&x[i], &x[j], gamma)).collect())
                    .collect();
                let (alpha, rho) = solve_smo(&kern, &labels, p.c, p.tol);
                let coef = alpha.iter().zip(&labels).map(|(a, l)| a * l).collect();
                (a, b, idx, coef, rho)
            })
            .collect();

        let mut sv_of_row: Vec<Option<usize>> = vec![None; x.len()];
        let mut support = Vec::new();
        let mut machines = Vec::new();
        for (a, b, idx, coef, rho) in solved {
            let mut terms = Vec::new();
            for (&row, &cf) in idx.iter().zip(&coef) {
                if cf == 0.0 {
                    continue;
                }
                let sv = *sv_of_row[row].get_or_insert_with(|| {
                    support.push(x[row].clone());
                    support.len() - 1
                });
                terms.push((sv, cf));
            }
            machines.push(BinarySvm {
                positive: a,
                negative: b,
                coef: terms,
                rho,
            });
        }
        Self {
            n_classes,
            gamma,
            support,
            machines,
        }
    }

    /// One-vs-one vote counts.
    pub fn votes(&self, x: &[f64]) -> Vec<f64> {
        let kx: Vec<f64> = self.support.iter().map(|s| rbf(s, x, self.gamma)).collect();
        let mut votes = vec![0.0; self.n_classes];
        for m in &self.machines {
            let f: f64 = m.coef.iter().map(|&(i, c)| c * kx[i]).sum::<f64>() - m.rho;
            votes[if f > 0.0 { m.positive } else { m.negative }] += 1.0;
        }
        votes
    }
}
