//! Accuracy, Macro F1, confusion matrices and chance baselines.

use crate::model::{Baselines, ClassMetrics, EvaluationReport, SleepStage, N_CLASSES};

use super::MlError;

pub fn class_distribution(y: &[usize]) -> [f64; N_CLASSES] {
    let mut d = [0.0; N_CLASSES];
    for &c in y {
        if c < N_CLASSES {
            d[c] += 1.0;
        }
    }
    let n = y.len().max(1) as f64;
    d.iter_mut().for_each(|v| *v /= n);
    d
}

/// `stratified_chance = Σ p²`, `majority = max p`.
pub fn baselines(dist: &[f64]) -> Result<Baselines, MlError> {
    let sum: f64 = dist.iter().sum();
    if dist.is_empty() || (sum - 1.0).abs() > 1e-6 || dist.iter().any(|&p| !(p >= 0.0)) {
        return Err(MlError::BadDistribution(sum));
    }
    Ok(Baselines {
        stratified_chance: dist.iter().map(|p| p * p).sum(),
        majority_class: dist.iter().copied().fold(0.0, f64::max),
    })
}

pub fn macro_f1(y_true: &[usize], y_pred: &[usize], n_classes: usize) -> f64 {
    let mut tp = vec![0usize; n_classes];
    let mut fp = vec![0usize; n_classes];
    let mut fn_ = vec![0usize; n_classes];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        if t == p {
            tp[t] += 1;
        } else {
            fp[p] += 1;
            fn_[t] += 1;
        }
    }
    (0..n_classes)
        .map(|c| f1_of(tp[c], fp[c], fn_[c]).2)
        .sum::<f64>()
        / n_classes as f64
}

fn f1_of(tp: usize, fp: usize, fn_: usize) -> (f64, f64, f64) {
    let precision = if tp + fp > 0 {
        tp as f64 / (tp + fp) as f64
    } else {
        0.0
    };
    let recall = if tp + fn_ > 0 {
        tp as f64 / (tp + fn_) as f64
    } else {
        0.0
    };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    (precision, recall, f1)
}

/// Full report over the four classifier classes. Baselines use the
/// distribution of `y_true`.
pub fn evaluate(y_true: &[usize], y_pred: &[usize]) -> Result<EvaluationReport, MlError> {
    if y_true.is_empty() {
        return Err(MlError::EmptyInput);
    }
    if y_true.len() != y_pred.len() {
        return Err(MlError::DimensionMismatch {
            expected: y_true.len(),
            got: y_pred.len(),
        });
    }
    if let Some(&c) = y_true.iter().chain(y_pred).find(|&&c| c >= N_CLASSES) {
        return Err(MlError::BadClass(c));
    }
    let mut counts = [[0usize; N_CLASSES]; N_CLASSES];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        counts[t][p] += 1;
    }
    let n = y_true.len();
    let correct: usize = (0..N_CLASSES).map(|c| counts[c][c]).sum();
    let mut confusion = [[0.0; N_CLASSES]; N_CLASSES];
    let mut empty_rows = Vec::new();
    let mut per_class = Vec::with_capacity(N_CLASSES);
    for c in 0..N_CLASSES {
        let support: usize = counts[c].iter().sum();
        let stage = SleepStage::CLASSES[c];
        if support == 0 {
            empty_rows.push(stage);
        } else {
            for p in 0..N_CLASSES {
                confusion[c][p] = counts[c][p] as f64 / support as f64;
            }
        }
        let tp = counts[c][c];
        let fp: usize = (0..N_CLASSES).filter(|&t| t != c).map(|t| counts[t][c]).sum();
        let (precision, recall, f1) = f1_of(tp, fp, support - tp);
        per_class.push(ClassMetrics {
            stage,
            precision,
            recall,
            f1,
            support,
        });
    }
    let macro_f1 = per_class.iter().map(|m| m.f1).sum::<f64>() / N_CLASSES as f64;
    Ok(EvaluationReport {
        n,
        accuracy: correct as f64 / n as f64,
        macro_f1,
        per_class,
        confusion_counts: counts,
        confusion,
        empty_rows,
        importances: None,
        baselines: baselines(&class_distribution(y_true))?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect() {
        let y = [0, 1, 2, 3, 1];
        let r = evaluate(&y, &y).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.macro_f1, 1.0);
    }

    #[test]
    fn constant_prediction_on_balanced_truth() {
        let y: Vec<usize> = (0..400).map(|i| i % 4).collect();
        let r = evaluate(&y, &vec![1; 400]).unwrap();
        assert!((r.macro_f1 - 0.1).abs() < 1e-12);
        assert_eq!(r.accuracy, 0.25);
    }

    #[test]
    fn empty_rows_flagged() {
        let r = evaluate(&[0, 0, 1], &[0, 1, 1]).unwrap();
        assert_eq!(r.empty_rows, vec![SleepStage::Rem, SleepStage::Wake]);
        assert_eq!(r.confusion[2], [0.0; 4]);
        assert_eq!(r.confusion[0], [0.5, 0.5, 0.0, 0.0]);
        assert!(matches!(evaluate(&[], &[]), Err(MlError::EmptyInput)));
    }

    #[test]
    fn baseline_shapes() {
        let u = baselines(&[0.25; 4]).unwrap();
        assert_eq!(u.stratified_chance, 0.25);
        let one = baselines(&[0.0, 1.0, 0.0, 0.0]).unwrap();
        assert_eq!((one.stratified_chance, one.majority_class), (1.0, 1.0));
        assert!(baselines(&[0.5, 0.4]).is_err());
    }
}
