//! SMOTE: oversample every class up to the majority count by interpolating
//! between a row and one of its nearest same-class neighbours.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::MlError;

pub const DEFAULT_K: usize = 5;

/// Where a synthetic row came from: `x[base] + u · (x[neighbor] - x[base])`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticOrigin {
    pub base: usize,
    pub neighbor: usize,
    pub u: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Resampled {
    /// Original rows first, synthetic rows appended.
    pub x: Vec<Vec<f64>>,
    pub y: Vec<usize>,
    pub n_original: usize,
    /// One entry per synthetic row, indices into the original rows.
    pub origins: Vec<SyntheticOrigin>,
    /// Synthetic rows added per class.
    pub added: Vec<usize>,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// The `k` nearest same-class rows of `rows[i]` (indices into `rows`),
/// nearest first, ties to the lower index.
pub fn nearest(x: &[Vec<f64>], rows: &[usize], i: usize, k: usize) -> Vec<usize> {
    let mut d: Vec<(f64, usize)> = rows
        .iter()
        .filter(|&&r| r != rows[i])
        .map(|&r| (dist2(&x[rows[i]], &x[r]), r))
        .collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    d.truncate(k);
    d.into_iter().map(|p| p.1).collect()
}

pub fn smote(
    x: &[Vec<f64>],
    y: &[usize],
    n_classes: usize,
    k: usize,
    seed: u64,
) -> Result<Resampled, MlError> {
    if x.len() != y.len() {
        return Err(MlError::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &c) in y.iter().enumerate() {
        members
            .get_mut(c)
            .ok_or(MlError::BadClass(c))?
            .push(i);
    }
    if let Some(c) = members.iter().position(|m| m.len() < 2) {
        return Err(MlError::DegenerateClass {
            class: c,
            rows: members[c].len(),
        });
    }
    let target = members.iter().map(Vec::len).max().unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out_x = x.to_vec();
    let mut out_y = y.to_vec();
    let mut origins = Vec::new();
    let mut added = vec![0; n_classes];
    for (c, rows) in members.iter().enumerate() {
        let need = target - rows.len();
        if need == 0 {
            continue;
        }
        let k = k.min(rows.len() - 1).max(1);
        let mut neighbours: Vec<Option<Vec<usize>>> = vec![None; rows.len()];
        for j in 0..need {
            // cycle through the class so every row seeds about equally
            let bi = j % rows.len();
            let nn = neighbours[bi].get_or_insert_with(|| nearest(x, rows, bi, k));
            let neighbor = nn[rng.random_range(0..nn.len())];
            let u: f64 = rng.random();
            let base = rows[bi];
            out_x.push(
                x[base]
                    .iter()
                    .zip(&x[neighbor])
                    .map(|(a, b)| a + u * (b - a))
                    .collect(),
            );
            out_y.push(c);
            origins.push(SyntheticOrigin { base, neighbor, u });
        }
        added[c] = need;
    }
    Ok(Resampled {
        x: out_x,
        y: out_y,
        n_original: x.len(),
        origins,
        added,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clamps_k_for_small_class() {
        let x: Vec<Vec<f64>> = (0..13).map(|i| vec![i as f64]).collect();
        let mut y = vec![0; 10];
        y.extend([1, 1, 1]);
        let r = smote(&x, &y, 2, 5, 1).unwrap();
        assert_eq!(r.added, vec![0, 7]);
        for o in &r.origins {
            assert!(o.base >= 10 && o.neighbor >= 10 && o.base != o.neighbor);
        }
    }

    #[test]
    fn degenerate() {
        let x = vec![vec![0.0]; 3];
        assert!(matches!(
            smote(&x, &[0, 0, 1], 2, 5, 0),
            Err(MlError::DegenerateClass { class: 1, rows: 1 })
        ));
    }

    #[test]
    fn neighbours_sorted() {
        let x: Vec<Vec<f64>> = [0.0, 10.0, 1.0, 3.0].iter().map(|&v| vec![v]).collect();
        assert_eq!(nearest(&x, &[0, 1, 2, 3], 0, 2), vec![2, 3]);
    }
}
