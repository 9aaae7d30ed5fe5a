//! Picking the winning configuration of each classifier kind.

use super::config::{ClassifierConfig, ClassifierKind};
use super::cv::ConfigSummary;
use super::MlError;

const TIE: f64 = 1e-12;

/// Highest mean Macro F1; ties go to the higher mean accuracy, then to the
/// earlier entry.
pub fn select_best(results: &[ConfigSummary]) -> Result<&ConfigSummary, MlError> {
    let mut best: Option<&ConfigSummary> = None;
    for r in results {
        best = match best {
            None => Some(r),
            Some(b) => {
                let better = r.mean_macro_f1 > b.mean_macro_f1 + TIE
                    || ((r.mean_macro_f1 - b.mean_macro_f1).abs() <= TIE
                        && r.mean_accuracy > b.mean_accuracy + TIE);
                Some(if better { r } else { b })
            }
        };
    }
    best.ok_or(MlError::EmptyResults)
}

/// The best configuration for `kind`.
pub fn select_config(
    results: &[ConfigSummary],
    kind: ClassifierKind,
) -> Result<ClassifierConfig, MlError> {
    let of_kind: Vec<ConfigSummary> = results
        .iter()
        .filter(|r| r.config.kind() == kind)
        .cloned()
        .collect();
    Ok(select_best(&of_kind)?.config)
}
