//! Exact greedy decision trees grown level by level.
//!
//! Each feature is sorted once per fit; every level then makes one pass over
//! each sorted column and updates the running split statistics of all open
//! nodes at once. Rows carry a non-negative weight (bootstrap multiplicity
//! or subsample membership); weight-0 rows are ignored.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Splits must improve the criterion by more than this.
pub const MIN_GAIN: f64 = 1e-12;

/// Feature-major view of a design matrix.
#[derive(Debug, Clone)]
pub struct Columns {
    pub cols: Vec<Vec<f64>>,
    pub n_rows: usize,
    /// Row indices of each column in ascending value order.
    order: Vec<Vec<u32>>,
}

impl Columns {
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n_rows = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        let cols: Vec<Vec<f64>> = (0..d).map(|f| rows.iter().map(|r| r[f]).collect()).collect();
        let order = cols
            .iter()
            .map(|c| {
                let mut idx: Vec<u32> = (0..n_rows as u32).collect();
                idx.sort_by(|&a, &b| c[a as usize].total_cmp(&c[b as usize]).then(a.cmp(&b)));
                idx
            })
            .collect();
        Self { cols, n_rows, order }
    }

    pub fn n_features(&self) -> usize {
        self.cols.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        /// Criterion improvement credited to `feature`.
        gain: f64,
    },
    Leaf {
        value: Vec<f64>,
    },
}

/// A fitted tree; node 0 is the root. Rows with `x[feature] <= threshold`
/// go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf_value(&self, x: &[f64]) -> &[f64] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => i = if x[*feature] <= *threshold { *left } else { *right },
                Node::Leaf { value } => return value,
            }
        }
    }

    /// Sum of split gains per feature.
    pub fn feature_gains(&self, n_features: usize) -> Vec<f64> {
        let mut out = vec![0.0; n_features];
        for n in &self.nodes {
            if let Node::Split { feature, gain, .. } = n {
                out[*feature] += gain;
            }
        }
        out
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match &t.nodes[i] {
                Node::Split { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
                Node::Leaf { .. } => 0,
            }
        }
        go(self, 0)
    }
}

/// Split quality in "score" form: the gain of a split is
/// `score(left) + score(right) - score(parent)` (times a constant).
pub trait Criterion: Sync {
    type Stats: Copy + Send;

    fn empty(&self) -> Self::Stats;
    fn add(&self, s: &mut Self::Stats, row: usize, weight: f64);
    fn minus(&self, total: &Self::Stats, part: &Self::Stats) -> Self::Stats;
    fn score(&self, s: &Self::Stats) -> f64;
    /// Weighted row count, used by min-split / min-leaf rules.
    fn count(&self, s: &Self::Stats) -> f64;
    fn child_ok(&self, s: &Self::Stats) -> bool;
    fn gain_scale(&self) -> f64 {
        1.0
    }
    /// Whether a node can still be improved at all.
    fn splittable(&self, s: &Self::Stats) -> bool;
    fn leaf_value(&self, s: &Self::Stats) -> Vec<f64>;
}

pub const MAX_CLASSES: usize = 4;

/// Gini impurity on class labels. Score `Σ n_c² / n` makes the gain equal
/// to the weighted Gini decrease `n·G(parent) - n_L·G(L) - n_R·G(R)`.
pub struct Gini<'a> {
    pub y: &'a [usize],
    pub n_classes: usize,
    pub min_samples_leaf: f64,
}

impl Criterion for Gini<'_> {
    type Stats = [f64; MAX_CLASSES + 1];

    fn empty(&self) -> Self::Stats {
        [0.0; MAX_CLASSES + 1]
    }

    fn add(&self, s: &mut Self::Stats, row: usize, w: f64) {
        s[self.y[row]] += w;
        s[MAX_CLASSES] += w;
    }

    fn minus(&self, total: &Self::Stats, part: &Self::Stats) -> Self::Stats {
        let mut out = *total;
        for (o, p) in out.iter_mut().zip(part) {
            *o -= p;
        }
        out
    }

    fn score(&self, s: &Self::Stats) -> f64 {
        let n = s[MAX_CLASSES];
        if n <= 0.0 {
            return 0.0;
        }
        s[..self.n_classes].iter().map(|c| c * c).sum::<f64>() / n
    }

    fn count(&self, s: &Self::Stats) -> f64 {
        s[MAX_CLASSES]
    }

    fn child_ok(&self, s: &Self::Stats) -> bool {
        s[MAX_CLASSES] >= self.min_samples_leaf
    }

    fn splittable(&self, s: &Self::Stats) -> bool {
        let n = s[MAX_CLASSES];
        s[..self.n_classes].iter().all(|&c| c < n)
    }

    fn leaf_value(&self, s: &Self::Stats) -> Vec<f64> {
        let n = s[MAX_CLASSES];
        s[..self.n_classes]
            .iter()
            .map(|c| if n > 0.0 { c / n } else { 0.0 })
            .collect()
    }
}

/// Second-order (Newton) criterion on per-row gradients and hessians. Score
/// `G² / (H + λ)`; leaf value `-G / (H + λ)` times the shrinkage.
pub struct Newton<'a> {
    pub grad: &'a [f64],
    pub hess: &'a [f64],
    pub lambda: f64,
    pub min_child_weight: f64,
    pub shrinkage: f64,
}

impl Criterion for Newton<'_> {
    /// (G, H, count)
    type Stats = [f64; 3];

    fn empty(&self) -> Self::Stats {
        [0.0; 3]
    }

    fn add(&self, s: &mut Self::Stats, row: usize, w: f64) {
        s[0] += w * self.grad[row];
        s[1] += w * self.hess[row];
        s[2] += w;
    }

    fn minus(&self, total: &Self::Stats, part: &Self::Stats) -> Self::Stats {
        [total[0] - part[0], total[1] - part[1], total[2] - part[2]]
    }

    fn score(&self, s: &Self::Stats) -> f64 {
        s[0] * s[0] / (s[1] + self.lambda)
    }

    fn count(&self, s: &Self::Stats) -> f64 {
        s[2]
    }

    fn child_ok(&self, s: &Self::Stats) -> bool {
        s[2] > 0.0 && s[1] >= self.min_child_weight
    }

    fn gain_scale(&self) -> f64 {
        0.5
    }

    fn splittable(&self, s: &Self::Stats) -> bool {
        s[2] >= 2.0
    }

    fn leaf_value(&self, s: &Self::Stats) -> Vec<f64> {
        let denom = s[1] + self.lambda;
        let w = if denom > 0.0 { -s[0] / denom } else { 0.0 };
        vec![w * self.shrinkage]
    }
}

/// How candidate features are chosen.
#[derive(Debug, Clone)]
pub enum FeatureSampling {
    /// The same fixed list at every node.
    Fixed(Vec<usize>),
    /// A fresh random subset of this size at every node.
    PerNode(usize),
}

#[derive(Debug, Clone)]
pub struct GrowParams {
    pub max_depth: Option<usize>,
    pub min_samples_split: f64,
    pub features: FeatureSampling,
}

struct Open<S> {
    node: usize,
    depth: usize,
    stats: S,
    features: Vec<usize>,
    best: Option<(f64, usize, f64)>,
    /// Stats of the left child at the best split.
    best_left: Option<S>,
}

/// Grows one tree on `x` with row `weights`.
pub fn grow<C: Criterion, R: Rng>(
    x: &Columns,
    weights: &[f64],
    crit: &C,
    params: &GrowParams,
    rng: &mut R,
) -> Tree {
    let n_features = x.n_features();
    let pick = |rng: &mut R| -> Vec<usize> {
        match &params.features {
            FeatureSampling::Fixed(f) => f.clone(),
            FeatureSampling::PerNode(k) => {
                let mut f = sample(rng, n_features, (*k).min(n_features)).into_vec();
                f.sort_unstable();
                f
            }
        }
    };

    let mut root = crit.empty();
    for (row, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            crit.add(&mut root, row, w);
        }
    }
    let mut nodes: Vec<Node> = vec![Node::Leaf {
        value: crit.leaf_value(&root),
    }];
    // which open node each row belongs to; u32::MAX for none
    let mut slot: Vec<u32> = weights
        .iter()
        .map(|&w| if w > 0.0 { 0 } else { u32::MAX })
        .collect();
    let can_split = |s: &C::Stats, depth: usize| {
        params.max_depth.is_none_or(|d| depth < d)
            && crit.count(s) >= params.min_samples_split
            && crit.splittable(s)
    };
    let mut open: Vec<Open<C::Stats>> = Vec::new();
    if can_split(&root, 0) {
        open.push(Open {
            node: 0,
            depth: 0,
            stats: root,
            features: pick(rng),
            best: None,
            best_left: None,
        });
    } else {
        slot.iter_mut().for_each(|s| *s = u32::MAX);
    }

    let mut uses = vec![false; n_features];
    let mut left: Vec<C::Stats> = Vec::new();
    let mut prev: Vec<f64> = Vec::new();
    while !open.is_empty() {
        let mut considers = vec![vec![false; n_features]; open.len()];
        uses.iter_mut().for_each(|u| *u = false);
        for (i, o) in open.iter().enumerate() {
            for &f in &o.features {
                considers[i][f] = true;
                uses[f] = true;
            }
        }
        for f in 0..n_features {
            if !uses[f] {
                continue;
            }
            let col = &x.cols[f];
            left.clear();
            left.resize(open.len(), crit.empty());
            prev.clear();
            prev.resize(open.len(), f64::NAN);
            for &row in &x.order[f] {
                let row = row as usize;
                let s = slot[row];
                if s == u32::MAX {
                    continue;
                }
                let s = s as usize;
                if !considers[s][f] {
                    continue;
                }
                let v = col[row];
                let p = prev[s];
                if !p.is_nan() && v > p {
                    let l = &left[s];
                    let o = &open[s];
                    let r = crit.minus(&o.stats, l);
                    if crit.child_ok(l) && crit.child_ok(&r) {
                        let gain = crit.gain_scale()
                            * (crit.score(l) + crit.score(&r) - crit.score(&o.stats));
                        let better = match o.best {
                            None => gain > MIN_GAIN,
                            Some((g, _, _)) => gain > g + MIN_GAIN * g.abs().max(1.0),
                        };
                        if better {
                            let mut t = 0.5 * (p + v);
                            if t >= v {
                                t = p;
                            }
                            let o = &mut open[s];
                            o.best = Some((gain, f, t));
                            o.best_left = Some(*l);
                        }
                    }
                }
                crit.add(&mut left[s], row, weights[row]);
                prev[s] = v;
            }
        }

        // materialize splits and open the next level
        let mut next: Vec<Open<C::Stats>> = Vec::new();
        let mut remap: Vec<[u32; 2]> = vec![[u32::MAX; 2]; open.len()];
        let mut routes: Vec<Option<(usize, f64)>> = vec![None; open.len()];
        for (i, o) in open.iter().enumerate() {
            let (Some((gain, f, t)), Some(l)) = (o.best, o.best_left) else {
                continue;
            };
            let r = crit.minus(&o.stats, &l);
            let li = nodes.len();
            nodes.push(Node::Leaf {
                value: crit.leaf_value(&l),
            });
            nodes.push(Node::Leaf {
                value: crit.leaf_value(&r),
            });
            nodes[o.node] = Node::Split {
                feature: f,
                threshold: t,
                left: li,
                right: li + 1,
                gain,
            };
            routes[i] = Some((f, t));
            for (side, (stats, node)) in [(l, li), (r, li + 1)].into_iter().enumerate() {
                if can_split(&stats, o.depth + 1) {
                    remap[i][side] = next.len() as u32;
                    next.push(Open {
                        node,
                        depth: o.depth + 1,
                        stats,
                        features: Vec::new(),
                        best: None,
                        best_left: None,
                    });
                }
            }
        }
        for n in next.iter_mut() {
            n.features = pick(rng);
        }
        for (row, s) in slot.iter_mut().enumerate() {
            if *s == u32::MAX {
                continue;
            }
            *s = match routes[*s as usize] {
                Some((f, t)) => remap[*s as usize][usize::from(x.cols[f][row] > t)],
                None => u32::MAX,
            };
        }
        open = next;
    }
    Tree { nodes }
}
