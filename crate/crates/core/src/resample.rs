//! SMOTE minority oversampling.
//!
//! Synthetic minority rows are placed on the segment between a minority
//! sample and one of its k nearest minority neighbors. Only training folds
//! are ever resampled.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResampleConfig {
    #[serde(default = "default_k")]
    pub k_neighbors: usize,
    /// Minority count is raised to `floor(target_ratio * majority count)`.
    #[serde(default = "default_ratio")]
    pub target_ratio: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_k() -> usize {
    5
}

fn default_ratio() -> f64 {
    1.0
}

impl Default for ResampleConfig {
    fn default() -> Self {
        ResampleConfig {
            k_neighbors: default_k(),
            target_ratio: default_ratio(),
            seed: 0,
        }
    }
}

impl ResampleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_neighbors == 0 {
            return Err(Error::config("smote.k_neighbors", "must be at least 1"));
        }
        if !(self.target_ratio > 0.0 && self.target_ratio <= 1.0) {
            return Err(Error::config(
                "smote.target_ratio",
                format!("{} is outside (0, 1]", self.target_ratio),
            ));
        }
        Ok(())
    }
}

/// Output of [`smote`]: the original rows followed by the synthetic ones.
#[derive(Debug, Clone, PartialEq)]
pub struct Resampled {
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<bool>,
    /// For each synthetic row, the `(seed, neighbor)` input indices it was
    /// interpolated between.
    pub origins: Vec<(usize, usize)>,
}

impl Resampled {
    pub fn synthetic_count(&self) -> usize {
        self.origins.len()
    }
}

/// Number of synthetic rows needed to lift the minority class to the target.
pub fn synthetic_needed(minority: usize, majority: usize, target_ratio: f64) -> usize {
    let target = (target_ratio * majority as f64).floor() as usize;
    target.saturating_sub(minority)
}

/// `seed + gamma * (neighbor - seed)`, component-wise.
pub fn interpolate(seed: &[f64], neighbor: &[f64], gamma: f64) -> Vec<f64> {
    seed.iter()
        .zip(neighbor)
        .map(|(&s, &n)| s + gamma * (n - s))
        .collect()
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// The `k` rows sharing row `i`'s label that are closest to it (Euclidean),
/// ties broken by ascending index. Returns fewer when fewer exist.
pub fn nearest_minority_neighbors(
    rows: &[Vec<f64>],
    labels: &[bool],
    i: usize,
    k: usize,
) -> Vec<usize> {
    let class = labels[i];
    let mut candidates: Vec<(f64, usize)> = labels
        .iter()
        .enumerate()
        .filter(|&(j, &l)| j != i && l == class)
        .map(|(j, _)| (squared_distance(&rows[i], &rows[j]), j))
        .collect();
    candidates.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    candidates.truncate(k);
    candidates.into_iter().map(|(_, j)| j).collect()
}

pub fn smote(rows: &[Vec<f64>], labels: &[bool], cfg: &ResampleConfig) -> Result<Resampled> {
    cfg.validate()?;
    if rows.len() != labels.len() {
        return Err(Error::Dimension {
            expected: rows.len(),
            actual: labels.len(),
        });
    }
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::Data("cannot resample degenerate fold".into()));
    }
    let minority_label = positives < negatives;
    let (minority, majority) = if minority_label {
        (positives, negatives)
    } else {
        (negatives, positives)
    };

    let needed = synthetic_needed(minority, majority, cfg.target_ratio);
    let mut out = Resampled {
        rows: rows.to_vec(),
        labels: labels.to_vec(),
        origins: Vec::with_capacity(needed),
    };
    if needed == 0 {
        return Ok(out);
    }
    if minority < 2 {
        return Err(Error::Data(format!(
            "minority class has {minority} sample; SMOTE needs at least 2"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..labels.len())
        .filter(|&i| labels[i] == minority_label)
        .collect();
    order.shuffle(&mut rng);

    let mut neighbor_cache: Vec<Option<Vec<usize>>> = vec![None; labels.len()];
    for j in 0..needed {
        let s = order[j % order.len()];
        let neighbors = neighbor_cache[s]
            .get_or_insert_with(|| nearest_minority_neighbors(rows, labels, s, cfg.k_neighbors));
        let n = neighbors[rng.random_range(0..neighbors.len())];
        let gamma: f64 = rng.random();
        out.rows.push(interpolate(&rows[s], &rows[n], gamma));
        out.labels.push(minority_label);
        out.origins.push((s, n));
    }
    Ok(out)
}
