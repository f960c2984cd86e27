//! Link prediction primitives: negative sampling, pair features, a linear
//! max-margin classifier and ranking/classification metrics.

use std::collections::HashSet;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::netcore::HeterogeneousNetwork;
use crate::seed;

/// Draws `theta * positives.len()` distinct ordered pairs `(u, v)`, `u != v`,
/// that are neither follow edges of `net` nor listed in `positives`.
pub fn sample_negatives(
    net: &HeterogeneousNetwork,
    theta: usize,
    positives: &[(usize, usize)],
    seed: u64,
) -> Result<Vec<(usize, usize)>> {
    let n = net.n_users();
    let mut taken: HashSet<(usize, usize)> = net.follow_set();
    taken.extend(positives.iter().copied().filter(|&(u, v)| u != v));
    let needed = theta * positives.len();
    let total = n * n.saturating_sub(1);
    let available = total - taken.len();
    if needed > available {
        return Err(Error::InsufficientNonEdges { needed, available });
    }
    let mut rng = seed::rng(seed);
    if needed * 2 <= available {
        // sparse regime: rejection sampling terminates quickly
        let mut out = Vec::with_capacity(needed);
        while out.len() < needed {
            let u = rng.random_range(0..n);
            let v = rng.random_range(0..n);
            if u != v && taken.insert((u, v)) {
                out.push((u, v));
            }
        }
        Ok(out)
    } else {
        let mut pool: Vec<(usize, usize)> = (0..n)
            .flat_map(|u| (0..n).map(move |v| (u, v)))
            .filter(|&(u, v)| u != v && !taken.contains(&(u, v)))
            .collect();
        let (chosen, _) = pool.partial_shuffle(&mut rng, needed);
        Ok(chosen.to_vec())
    }
}

/// `[Z(u,:), Z(v,:)]`.
pub fn link_features(z: &Array2<f64>, (u, v): (usize, usize)) -> Result<Vec<f64>> {
    let n = z.nrows();
    for i in [u, v] {
        if i >= n {
            return Err(Error::IndexOutOfRange { index: i, len: n });
        }
    }
    Ok(z.row(u).iter().chain(z.row(v).iter()).copied().collect())
}

/// Solver settings for [`train_linear_classifier`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SvmConfig {
    /// L2 regularisation constant.
    pub lambda: f64,
    /// Passes over the training set.
    pub passes: usize,
    /// Scale each feature to zero mean and unit variance over the training
    /// set before fitting. The returned classifier still takes raw features.
    pub standardize: bool,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            lambda: 1e-4,
            passes: 200,
            standardize: true,
        }
    }
}

/// `score(x) = w · x + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearClassifier {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearClassifier {
    pub fn score(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + self.bias
    }

    pub fn predict(&self, x: &[f64]) -> i8 {
        if self.score(x) >= 0.0 {
            1
        } else {
            -1
        }
    }
}

/// L2-regularised hinge loss minimised by Pegasos stochastic subgradient
/// steps, `eta_t = 1 / (lambda t)`. The bias is an extra weight on a
/// constant feature. Labels must be `+1` or `-1`.
pub fn train_linear_classifier(
    features: &[Vec<f64>],
    labels: &[i8],
    cfg: &SvmConfig,
    seed: u64,
) -> Result<LinearClassifier> {
    if features.len() != labels.len() {
        return Err(Error::LengthMismatch(features.len(), labels.len()));
    }
    if !labels.contains(&1) || !labels.contains(&-1) {
        return Err(Error::SingleClass);
    }
    if labels.iter().any(|&y| y != 1 && y != -1) {
        return Err(Error::InvalidConfig("labels must be +1 or -1".into()));
    }
    if !(cfg.lambda > 0.0) || cfg.passes == 0 {
        return Err(Error::InvalidConfig("SVM needs lambda > 0 and at least one pass".into()));
    }
    let dim = features[0].len();
    if let Some(f) = features.iter().find(|f| f.len() != dim) {
        return Err(Error::LengthMismatch(f.len(), dim));
    }

    let (mean, scale) = if cfg.standardize {
        feature_moments(features, dim)
    } else {
        (vec![0.0; dim], vec![1.0; dim])
    };
    let scaled: Vec<Vec<f64>> = features
        .iter()
        .map(|f| f.iter().zip(&mean).zip(&scale).map(|((x, m), s)| (x - m) / s).collect())
        .collect();

    let mut w = vec![0.0; dim + 1];
    let mut rng = seed::rng(seed);
    let mut order: Vec<usize> = (0..features.len()).collect();
    let mut t = 0u64;
    for _ in 0..cfg.passes {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (cfg.lambda * t as f64);
            let x = &scaled[i];
            let y = labels[i] as f64;
            let margin = y * (x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + w[dim]);
            let shrink = 1.0 - eta * cfg.lambda;
            w.iter_mut().for_each(|v| *v *= shrink);
            if margin < 1.0 {
                for (v, a) in w.iter_mut().zip(x) {
                    *v += eta * y * a;
                }
                w[dim] += eta * y;
            }
        }
    }
    // fold the standardisation into the raw-feature weights
    let mut bias = w.pop().unwrap();
    for ((wk, m), s) in w.iter_mut().zip(&mean).zip(&scale) {
        *wk /= s;
        bias -= *wk * m;
    }
    Ok(LinearClassifier { weights: w, bias })
}

/// Per-feature mean and standard deviation; constant features get scale 1.
fn feature_moments(features: &[Vec<f64>], dim: usize) -> (Vec<f64>, Vec<f64>) {
    let n = features.len() as f64;
    let mut mean = vec![0.0; dim];
    for f in features {
        mean.iter_mut().zip(f).for_each(|(m, x)| *m += x / n);
    }
    let mut var = vec![0.0; dim];
    for f in features {
        var.iter_mut().zip(f).zip(&mean).for_each(|((v, x), m)| *v += (x - m) * (x - m) / n);
    }
    let scale = var.into_iter().map(|v| if v > 0.0 { v.sqrt() } else { 1.0 }).collect();
    (mean, scale)
}

/// Mann-Whitney AUC: the fraction of (positive, negative) pairs in which the
/// positive scores higher, ties counting one half. Labels are `+1` / `-1`.
pub fn auc(scores: &[f64], labels: &[i8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch(scores.len(), labels.len()));
    }
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // midranks over tie groups, 1-based
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += mid * idx[i..=j].iter().filter(|&&k| labels[k] == 1).count() as f64;
        i = j + 1;
    }
    let np = n_pos as f64;
    Ok((rank_sum - np * (np + 1.0) / 2.0) / (np * n_neg as f64))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassificationMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Metrics with `+1` as the positive class. Precision and recall are 0 when
/// undefined, and so is F1 when `P + R = 0`.
pub fn classification_metrics(pred: &[i8], truth: &[i8]) -> Result<ClassificationMetrics> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch(pred.len(), truth.len()));
    }
    let (mut tp, mut fp, mut fn_, mut tn) = (0usize, 0usize, 0usize, 0usize);
    for (&p, &t) in pred.iter().zip(truth) {
        match (p == 1, t == 1) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(ClassificationMetrics {
        accuracy: ratio(tp + tn, pred.len()),
        precision,
        recall,
        f1,
    })
}
