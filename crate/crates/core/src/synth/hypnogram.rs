//! Semi-Markov stage sequences.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use super::profile::ProfileSet;
use crate::model::{SleepStage, N_CLASSES};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hypnogram {
    pub stages: Vec<SleepStage>,
}

impl Hypnogram {
    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }

    /// Maximal runs of equal stages as `(stage, start, len)`.
    pub fn runs(&self) -> Vec<(SleepStage, usize, usize)> {
        let mut out: Vec<(SleepStage, usize, usize)> = Vec::new();
        for (i, &s) in self.stages.iter().enumerate() {
            match out.last_mut() {
                Some((last, _, len)) if *last == s => *len += 1,
                _ => out.push((s, i, 1)),
            }
        }
        out
    }

    /// Epoch counts per class; `Not Detected` epochs are not counted.
    pub fn class_counts(&self) -> [usize; N_CLASSES] {
        let mut c = [0; N_CLASSES];
        for s in &self.stages {
            if let Ok(i) = s.class_index() {
                c[i] += 1;
            }
        }
        c
    }
}

fn draw_run<R: Rng>(rng: &mut R, mean: f64, shape: f64) -> usize {
    // ceil(Gamma) has mean close to `mean + 0.5`.
    let scale = ((mean - 0.5) / shape).max(1e-6);
    let g = Gamma::new(shape, scale).expect("positive gamma parameters");
    (g.sample(rng).ceil() as usize).max(1)
}

/// Stage sequence of `n` epochs. Nights open in Wake; every run of Deep,
/// REM or Wake returns to Light and Light exits to one of the three.
/// Occasional epochs are relabeled `Not Detected` afterwards.
pub fn generate_hypnogram<R: Rng>(rng: &mut R, n: usize, p: &ProfileSet) -> Hypnogram {
    let means = p.mean_runs();
    let mut stages = Vec::with_capacity(n);
    let mut stage = SleepStage::Wake;
    while stages.len() < n {
        let idx = stage.class_index().expect("trainable stage");
        let len = draw_run(rng, means[idx], p.run_gamma_shape);
        stages.extend(std::iter::repeat_n(stage, len.min(n - stages.len())));
        stage = if stage == SleepStage::LightSleep {
            let u: f64 = rng.random();
            let [deep, rem, _] = p.light_exit;
            if u < deep {
                SleepStage::DeepSleep
            } else if u < deep + rem {
                SleepStage::Rem
            } else {
                SleepStage::Wake
            }
        } else {
            SleepStage::LightSleep
        };
    }
    for s in stages.iter_mut() {
        if rng.random::<f64>() < p.not_detected_rate {
            *s = SleepStage::NotDetected;
        }
    }
    Hypnogram { stages }
}
