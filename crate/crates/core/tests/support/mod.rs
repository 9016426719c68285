//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use num_bigint::BigInt;
use num_rational::BigRational;

use facetrec::cli::synth_experiment;
use facetrec::corpus::write_corpus;
use facetrec::inventory::ScoringKey;
use facetrec::models::{
    logistic_objective, predict, train_logistic_regression_traced, train_naive_bayes,
    LogisticRegressionConfig,
};
use facetrec::resample::{smote, ResampleConfig};
use facetrec::synth::{generate, SynthConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn pow(base: &BigRational, exp: u32) -> BigRational {
    (0..exp).fold(rat(1, 1), |acc, _| acc * base)
}

/// Multinomial NB posterior argmax computed with exact rationals:
/// `P(c) * prod_j theta_cj^x_j` with `theta_cj = (n_cj + a) / (n_c + a V)`.
/// `alpha` is `num / den`. An exact tie predicts negative.
pub fn nb_oracle(rows: &[Vec<u32>], labels: &[bool], alpha: (i64, i64), query: &[u32]) -> bool {
    let dim = query.len();
    let alpha = rat(alpha.0, alpha.1);
    let n = rows.len() as i64;
    let posterior = |class: bool| {
        let members: Vec<&Vec<u32>> = rows
            .iter()
            .zip(labels)
            .filter(|(_, &l)| l == class)
            .map(|(r, _)| r)
            .collect();
        let prior = rat(members.len() as i64, n);
        let counts: Vec<i64> = (0..dim)
            .map(|j| members.iter().map(|r| i64::from(r[j])).sum())
            .collect();
        let total: i64 = counts.iter().sum();
        let denom = rat(total, 1) + &alpha * rat(dim as i64, 1);
        counts.iter().zip(query).fold(prior, |acc, (&c, &x)| {
            let theta = (rat(c, 1) + &alpha) / &denom;
            acc * pow(&theta, x)
        })
    };
    posterior(true) > posterior(false)
}

/// Central finite difference of `f` along every coordinate of `x`.
pub fn central_difference<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut up = x.to_vec();
            let mut down = x.to_vec();
            up[i] += h;
            down[i] -= h;
            (f(&up) - f(&down)) / (2.0 * h)
        })
        .collect()
}

/// `|a - b| / max(|a|, |b|, floor)`.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Whether `p = a + g (b - a)` for a single `g` in `[0, 1]`, up to rounding.
pub fn on_segment(p: &[f64], a: &[f64], b: &[f64]) -> bool {
    let (axis, span) = a
        .iter()
        .zip(b)
        .map(|(x, y)| y - x)
        .enumerate()
        .max_by(|x, y| x.1.abs().total_cmp(&y.1.abs()))
        .unwrap_or((0, 0.0));
    let tol = |v: f64| 1e-9 * (1.0 + v.abs());
    if span == 0.0 {
        return p.iter().zip(a).all(|(x, y)| (x - y).abs() <= tol(*y));
    }
    let g = (p[axis] - a[axis]) / span;
    if !(-1e-12..=1.0 + 1e-12).contains(&g) {
        return false;
    }
    p.iter()
        .zip(a.iter().zip(b))
        .all(|(&pi, (&ai, &bi))| (pi - (ai + g * (bi - ai))).abs() <= tol(ai.abs().max(bi.abs())))
}

/// Writes a synthetic corpus, embedding files and experiment config into
/// `dir`; returns the config path.
pub fn write_synthetic(dir: &Path, cfg: &SynthConfig, folds: usize) -> PathBuf {
    let out = generate(cfg, &ScoringKey::bfi44_default()).expect("synthetic corpus");
    write_corpus(dir.join("corpus.jsonl"), &out.records).unwrap();
    out.skip.write(dir.join("skip.vec")).unwrap();
    out.cbow.write(dir.join("cbow.vec")).unwrap();
    let path = dir.join("experiment.toml");
    std::fs::write(&path, synth_experiment(cfg.seed, folds).to_toml_string()).unwrap();
    path
}

fn labels_with_both(rng: &mut ChaCha8Rng, n: usize) -> Vec<bool> {
    loop {
        let labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        if labels.iter().any(|&l| l) && labels.iter().any(|&l| !l) {
            return labels;
        }
    }
}

/// One random NB instance (1..=4 count features, 2..=8 documents, alpha in
/// {1/2, 1, 2}): every training row and 8 fresh queries must match the oracle.
pub fn check_nb_instance(seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = rng.random_range(1..=4);
    let n = rng.random_range(2..=8);
    let alpha = [(1, 2), (1, 1), (2, 1)][rng.random_range(0..3)];
    let counts = |rng: &mut ChaCha8Rng| {
        (0..dim)
            .map(|_| rng.random_range(0..=3u32))
            .collect::<Vec<u32>>()
    };
    let rows: Vec<Vec<u32>> = (0..n).map(|_| counts(&mut rng)).collect();
    let labels = labels_with_both(&mut rng, n);
    let mut queries = rows.clone();
    queries.extend((0..8).map(|_| counts(&mut rng)));

    let as_f64 = |r: &Vec<u32>| r.iter().map(|&v| f64::from(v)).collect::<Vec<f64>>();
    let model = train_naive_bayes(
        &rows.iter().map(as_f64).collect::<Vec<_>>(),
        &labels,
        alpha.0 as f64 / alpha.1 as f64,
    )
    .map_err(|e| e.to_string())?;
    let got = predict(&model, &queries.iter().map(as_f64).collect::<Vec<_>>())
        .map_err(|e| e.to_string())?;
    for (q, &label) in queries.iter().zip(&got.labels) {
        let want = nb_oracle(&rows, &labels, alpha, q);
        if want != label {
            return Err(format!(
                "seed {seed}: query {q:?} predicted {label}, oracle {want}"
            ));
        }
    }
    Ok(())
}

pub const FD_STEP: f64 = 1e-6;
pub const FD_TOLERANCE: f64 = 1e-5;
/// Denominator floor for relative error, so components that are zero up to
/// rounding do not blow the ratio up.
pub const FD_FLOOR: f64 = 1e-4;

/// One random LR instance: gradient check at a random point and monotone
/// loss under default training.
pub fn check_lr_instance(seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = rng.random_range(1..=5);
    let n = rng.random_range(3..=12);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    let labels = labels_with_both(&mut rng, n);
    let l2 = if rng.random_bool(0.3) {
        0.0
    } else {
        rng.random_range(0.0..0.5)
    };
    let w: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.5..1.5)).collect();
    let b: f64 = rng.random_range(-1.0..1.0);

    let obj = logistic_objective(&rows, &labels, &w, b, l2);
    let mut point = w.clone();
    point.push(b);
    let numeric = central_difference(
        |p| logistic_objective(&rows, &labels, &p[..dim], p[dim], l2).loss,
        &point,
        FD_STEP,
    );
    let analytic: Vec<f64> = obj
        .grad_weights
        .iter()
        .copied()
        .chain([obj.grad_bias])
        .collect();
    for (i, (a, f)) in analytic.iter().zip(&numeric).enumerate() {
        let err = relative_error(*a, *f, FD_FLOOR);
        if err > FD_TOLERANCE {
            return Err(format!(
                "seed {seed}: component {i} analytic {a} numeric {f} (rel {err:e})"
            ));
        }
    }

    let (_, trace) = train_logistic_regression_traced(
        &rows,
        &labels,
        &LogisticRegressionConfig {
            l2,
            ..Default::default()
        },
    )
    .map_err(|e| e.to_string())?;
    if let Some(i) = trace.windows(2).position(|w| w[1] > w[0]) {
        return Err(format!(
            "seed {seed}: loss rose at epoch {}: {} -> {}",
            i + 1,
            trace[i],
            trace[i + 1]
        ));
    }
    Ok(())
}

/// One random SMOTE instance with default `k` and a random target ratio.
pub fn check_smote_instance(seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = rng.random_range(1..=4);
    let minority = rng.random_range(2..=12);
    let majority = rng.random_range(minority..=30);
    let minority_label = rng.random_bool(0.5);
    let n = minority + majority;
    let mut labels: Vec<bool> = (0..n)
        .map(|i| {
            if i < minority {
                minority_label
            } else {
                !minority_label
            }
        })
        .collect();
    // Interleave classes so originals are not sorted by label.
    for i in (1..n).rev() {
        labels.swap(i, rng.random_range(0..=i));
    }
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            (0..dim)
                .map(|_| {
                    if rng.random_bool(0.2) {
                        rng.random_range(-2..=2) as f64
                    } else {
                        rng.random_range(-5.0..5.0)
                    }
                })
                .collect()
        })
        .collect();
    let ratio = if rng.random_bool(0.5) {
        1.0
    } else {
        rng.random_range(0.3..=1.0)
    };
    let cfg = ResampleConfig {
        target_ratio: ratio,
        seed: rng.random(),
        ..Default::default()
    };
    if cfg.k_neighbors != 5 {
        return Err(format!("default k is {}", cfg.k_neighbors));
    }
    let out = smote(&rows, &labels, &cfg).map_err(|e| e.to_string())?;

    for (i, (orig, kept)) in rows.iter().zip(&out.rows).enumerate() {
        if orig
            .iter()
            .zip(kept)
            .any(|(a, b)| a.to_bits() != b.to_bits())
            || labels[i] != out.labels[i]
        {
            return Err(format!("seed {seed}: original row {i} changed"));
        }
    }
    let target = ((ratio * majority as f64).floor() as usize).max(minority);
    let min_after = out.labels.iter().filter(|&&l| l == minority_label).count();
    let maj_after = out.labels.len() - min_after;
    if min_after != target || maj_after != majority {
        return Err(format!(
            "seed {seed}: counts {min_after}/{maj_after}, want {target}/{majority}"
        ));
    }
    if out.origins.len() != out.rows.len() - n {
        return Err(format!("seed {seed}: origins do not match synthetic rows"));
    }
    for (j, &(s, nb)) in out.origins.iter().enumerate() {
        let p = &out.rows[n + j];
        if out.labels[n + j] != minority_label
            || labels[s] != minority_label
            || labels[nb] != minority_label
            || s == nb
        {
            return Err(format!(
                "seed {seed}: synthetic {j} uses non-minority endpoints"
            ));
        }
        if !on_segment(p, &rows[s], &rows[nb]) {
            return Err(format!(
                "seed {seed}: synthetic {j} {p:?} off segment {:?}-{:?}",
                rows[s], rows[nb]
            ));
        }
        // The neighbor must be among the k nearest: fewer than k same-class
        // rows are strictly closer to the seed.
        let d = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
        let dn = d(&rows[s], &rows[nb]);
        let closer = (0..n)
            .filter(|&i| i != s && labels[i] == minority_label && d(&rows[s], &rows[i]) < dn)
            .count();
        if closer >= cfg.k_neighbors {
            return Err(format!(
                "seed {seed}: neighbor {nb} of {s} is not among the {} nearest",
                cfg.k_neighbors
            ));
        }
    }
    Ok(())
}
