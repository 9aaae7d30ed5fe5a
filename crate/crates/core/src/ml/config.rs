//! Classifier configurations. JSON form:
//! `{"kind": "RandomForest", "params": {...}, "seed": 42}`; unknown keys
//! are rejected and missing parameters take the documented defaults.

use serde::{Deserialize, Serialize};

use super::MlError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ClassifierKind {
    #[serde(rename = "SVM")]
    Svm,
    RandomForest,
    GradientBoostedTrees,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 3] = [
        ClassifierKind::Svm,
        ClassifierKind::RandomForest,
        ClassifierKind::GradientBoostedTrees,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ClassifierKind::Svm => "SVM",
            ClassifierKind::RandomForest => "RandomForest",
            ClassifierKind::GradientBoostedTrees => "GradientBoostedTrees",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GammaName {
    Scale,
}

/// RBF width: `"scale"` or an explicit positive value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Gamma {
    Named(GammaName),
    Value(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Rbf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmParams {
    #[serde(rename = "C")]
    pub c: f64,
    pub gamma: Gamma,
    pub kernel: KernelKind,
    pub tol: f64,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            gamma: Gamma::Named(GammaName::Scale),
            kernel: KernelKind::Rbf,
            tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaxFeaturesName {
    Sqrt,
    All,
}

/// Features considered at each split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MaxFeatures {
    Named(MaxFeaturesName),
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, n_features: usize) -> usize {
        let k = match self {
            MaxFeatures::Named(MaxFeaturesName::Sqrt) => (n_features as f64).sqrt().floor() as usize,
            MaxFeatures::Named(MaxFeaturesName::All) => n_features,
            MaxFeatures::Count(k) => k,
        };
        k.clamp(1, n_features.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub n_estimators: usize,
    /// `null` grows until the other stopping rules apply.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub max_features: MaxFeatures,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_estimators: 150,
            max_depth: Some(15),
            min_samples_split: 3,
            min_samples_leaf: 2,
            max_features: MaxFeatures::Named(MaxFeaturesName::Sqrt),
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoostParams {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    /// Fraction of rows drawn (without replacement) for each stage.
    pub subsample: f64,
    /// Fraction of features drawn for each tree.
    pub colsample: f64,
    /// L2 penalty on leaf values.
    pub lambda: f64,
    /// Minimum hessian sum in a child.
    pub min_child_weight: f64,
}

impl Default for BoostParams {
    fn default() -> Self {
        Self {
            n_estimators: 100,
            max_depth: 6,
            learning_rate: 0.1,
            subsample: 0.8,
            colsample: 0.8,
            lambda: 1.0,
            min_child_weight: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelParams {
    Svm(SvmParams),
    RandomForest(ForestParams),
    GradientBoostedTrees(BoostParams),
}

impl ModelParams {
    pub fn kind(&self) -> ClassifierKind {
        match self {
            ModelParams::Svm(_) => ClassifierKind::Svm,
            ModelParams::RandomForest(_) => ClassifierKind::RandomForest,
            ModelParams::GradientBoostedTrees(_) => ClassifierKind::GradientBoostedTrees,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawConfig", into = "RawConfig")]
pub struct ClassifierConfig {
    pub params: ModelParams,
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    kind: ClassifierKind,
    #[serde(default)]
    params: serde_json::Map<String, serde_json::Value>,
    #[serde(default)]
    seed: u64,
}

impl TryFrom<RawConfig> for ClassifierConfig {
    type Error = MlError;

    fn try_from(raw: RawConfig) -> Result<Self, MlError> {
        let value = serde_json::Value::Object(raw.params);
        let bad = |e: serde_json::Error| MlError::InvalidConfig(format!("{}: {e}", raw.kind.name()));
        let params = match raw.kind {
            ClassifierKind::Svm => ModelParams::Svm(serde_json::from_value(value).map_err(bad)?),
            ClassifierKind::RandomForest => {
                ModelParams::RandomForest(serde_json::from_value(value).map_err(bad)?)
            }
            ClassifierKind::GradientBoostedTrees => {
                ModelParams::GradientBoostedTrees(serde_json::from_value(value).map_err(bad)?)
            }
        };
        let cfg = ClassifierConfig {
            params,
            seed: raw.seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl From<ClassifierConfig> for RawConfig {
    fn from(c: ClassifierConfig) -> Self {
        let value = match c.params {
            ModelParams::Svm(p) => serde_json::to_value(p),
            ModelParams::RandomForest(p) => serde_json::to_value(p),
            ModelParams::GradientBoostedTrees(p) => serde_json::to_value(p),
        };
        let params = match value {
            Ok(serde_json::Value::Object(m)) => m,
            _ => serde_json::Map::new(),
        };
        RawConfig {
            kind: c.params.kind(),
            params,
            seed: c.seed,
        }
    }
}

impl ClassifierConfig {
    /// The reference configuration for each classifier kind.
    pub fn default_for(kind: ClassifierKind, seed: u64) -> Self {
        let params = match kind {
            ClassifierKind::Svm => ModelParams::Svm(SvmParams::default()),
            ClassifierKind::RandomForest => ModelParams::RandomForest(ForestParams::default()),
            ClassifierKind::GradientBoostedTrees => {
                ModelParams::GradientBoostedTrees(BoostParams::default())
            }
        };
        Self { params, seed }
    }

    pub fn kind(&self) -> ClassifierKind {
        self.params.kind()
    }

    pub fn validate(&self) -> Result<(), MlError> {
        let fail = |msg: &str| Err(MlError::InvalidConfig(format!("{}: {msg}", self.kind().name())));
        match self.params {
            ModelParams::Svm(p) => {
                if !(p.c > 0.0 && p.c.is_finite()) {
                    return fail("C must be positive");
                }
                if let Gamma::Value(g) = p.gamma {
                    if !(g > 0.0 && g.is_finite()) {
                        return fail("gamma must be positive or \"scale\"");
                    }
                }
                if !(p.tol > 0.0) {
                    return fail("tol must be positive");
                }
            }
            ModelParams::RandomForest(p) => {
                if p.n_estimators == 0 {
                    return fail("n_estimators must be at least 1");
                }
                if p.max_depth == Some(0) {
                    return fail("max_depth must be at least 1");
                }
                if p.min_samples_split < 2 || p.min_samples_leaf < 1 {
                    return fail("min_samples_split >= 2 and min_samples_leaf >= 1 required");
                }
                if p.max_features == MaxFeatures::Count(0) {
                    return fail("max_features must be at least 1");
                }
            }
            ModelParams::GradientBoostedTrees(p) => {
                if p.n_estimators == 0 || p.max_depth == 0 {
                    return fail("n_estimators and max_depth must be at least 1");
                }
                if !(p.learning_rate > 0.0 && p.learning_rate <= 1.0) {
                    return fail("learning_rate must lie in (0, 1]");
                }
                for (name, v) in [("subsample", p.subsample), ("colsample", p.colsample)] {
                    if !(v > 0.0 && v <= 1.0) {
                        return fail(&format!("{name} must lie in (0, 1]"));
                    }
                }
                if !(p.lambda >= 0.0) || !(p.min_child_weight >= 0.0) {
                    return fail("lambda and min_child_weight must be non-negative");
                }
            }
        }
        Ok(())
    }
}

/// One reference configuration per kind, in declaration order.
pub fn default_grid(seed: u64) -> Vec<ClassifierConfig> {
    ClassifierKind::ALL
        .iter()
        .map(|&k| ClassifierConfig::default_for(k, seed))
        .collect()
}
