//! Labeled design matrix with night grouping.

use std::collections::BTreeSet;

use crate::features::FeatureRow;

use super::MlError;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<usize>,
    pub night: Vec<String>,
    pub epoch_idx: Vec<usize>,
}

impl Dataset {
    /// Keeps rows with a classifier stage; other rows are dropped.
    pub fn from_rows(rows: &[FeatureRow]) -> Self {
        let mut d = Dataset::default();
        for r in rows {
            if let Ok(c) = r.stage.class_index() {
                d.x.push(r.features.values().to_vec());
                d.y.push(c);
                d.night.push(r.night_id.clone());
                d.epoch_idx.push(r.epoch_idx);
            }
        }
        d
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Distinct nights, sorted.
    pub fn nights(&self) -> Vec<String> {
        self.night.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect()
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            x: idx.iter().map(|&i| self.x[i].clone()).collect(),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            night: idx.iter().map(|&i| self.night[i].clone()).collect(),
            epoch_idx: idx.iter().map(|&i| self.epoch_idx[i]).collect(),
        }
    }

    pub fn rows_of(&self, nights: &[String]) -> Vec<usize> {
        (0..self.len()).filter(|&i| nights.contains(&self.night[i])).collect()
    }

    pub fn select_nights(&self, nights: &[String]) -> Dataset {
        self.subset(&self.rows_of(nights))
    }

    pub fn check(&self) -> Result<(), MlError> {
        let n = self.y.len();
        if self.x.len() != n || self.night.len() != n || self.epoch_idx.len() != n {
            return Err(MlError::DimensionMismatch {
                expected: n,
                got: self.x.len(),
            });
        }
        Ok(())
    }
}
