//! Independent reference implementations shared by the test targets.
#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thalparc_core::{Label, LabelSet, Matrix};

pub struct OracleVote {
    pub winner: Label,
    pub weights: [f64; 14],
}

/// Quadratic-scan k-NN vote: every point is ranked by (distance, index),
/// each of the first `k` splits one vote evenly over its labels, and ties
/// in weight fall to the smaller mean neighbor distance, then schema order.
pub fn vote_oracle(coords: &Matrix, labels: &[LabelSet], query: &[f64], k: usize) -> OracleVote {
    let mut order: Vec<(f64, usize)> = (0..coords.rows())
        .map(|j| {
            let d2: f64 = coords.row(j).iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum();
            (d2.sqrt(), j)
        })
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut weights = [0.0; 14];
    let mut dsum = [0.0; 14];
    let mut count = [0usize; 14];
    for &(d, j) in &order[..k] {
        let set: Vec<Label> = labels[j].iter().collect();
        for l in &set {
            weights[l.index()] += 1.0 / set.len() as f64;
            dsum[l.index()] += d;
            count[l.index()] += 1;
        }
    }
    let mut best: Option<(Label, f64, f64)> = None;
    for l in Label::ALL {
        let i = l.index();
        if count[i] == 0 {
            continue;
        }
        let mean = dsum[i] / count[i] as f64;
        best = match best {
            None => Some((l, weights[i], mean)),
            Some((bl, bw, bm)) => {
                let better = if (weights[i] - bw).abs() > 1e-9 {
                    weights[i] > bw
                } else {
                    mean < bm
                };
                if better {
                    Some((l, weights[i], mean))
                } else {
                    Some((bl, bw, bm))
                }
            }
        };
    }
    OracleVote {
        winner: best.expect("at least one label").0,
        weights,
    }
}

/// Points on a coarse integer grid (so distances tie often) with one to
/// three nucleus labels each, a third of them multi-labeled.
pub fn tie_heavy_set(n: usize, dim: usize, seed: u64) -> (Matrix, Vec<LabelSet>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data: Vec<f64> = (0..n * dim).map(|_| rng.random_range(0..6) as f64).collect();
    let labels = (0..n)
        .map(|_| {
            let m = if rng.random_bool(0.33) { rng.random_range(2..=3) } else { 1 };
            let mut s = LabelSet::EMPTY;
            while s.len() < m {
                s.insert(Label::NUCLEI[rng.random_range(0..4)]);
            }
            s
        })
        .collect();
    (Matrix::from_vec(n, dim, data).unwrap(), labels)
}

/// Dice per nucleus from explicit voxel-index sets.
pub fn dice_set_oracle(pred: &[Label], truth: &[LabelSet]) -> [f64; 13] {
    let mut out = [0.0; 13];
    for (slot, l) in Label::NUCLEI.iter().enumerate() {
        let scored = |i: &usize| !truth[*i].nuclei().is_empty();
        let p: BTreeSet<usize> = (0..pred.len()).filter(scored).filter(|&i| pred[i] == *l).collect();
        let t: BTreeSet<usize> = (0..pred.len()).filter(scored).filter(|&i| truth[i].contains(*l)).collect();
        let both = p.intersection(&t).count();
        out[slot] = if p.is_empty() && t.is_empty() {
            1.0
        } else {
            2.0 * both as f64 / (p.len() + t.len()) as f64
        };
    }
    out
}

pub fn weighted_mean_oracle(values: &[f64], weights: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (v, w) in values.iter().zip(weights) {
        num += v * w;
        den += w;
    }
    num / den
}

/// Mean and population standard deviation by the two-pass formula.
pub fn mean_std_oracle(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, (ss / n).sqrt())
}

/// σ for distances (1,2,3,4) with k = 4: with t = exp(−1/σ) the defining
/// equation reduces to t + t² + t³ = 1.
pub fn worked_sigma() -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let t = 0.5 * (lo + hi);
        if t + t * t + t * t * t < 1.0 {
            lo = t;
        } else {
            hi = t;
        }
    }
    -1.0 / (0.5 * (lo + hi)).ln()
}

pub fn calibration_residual(d: &[f64], rho: f64, sigma: f64, k: usize) -> f64 {
    d.iter().map(|&x| (-(x - rho).max(0.0) / sigma).exp()).sum::<f64>() - (k as f64).log2()
}

/// FA straight from its definition.
pub fn fa_oracle(l: [f64; 3]) -> f64 {
    let m = (l[0] + l[1] + l[2]) / 3.0;
    let num = (l[0] - m).powi(2) + (l[1] - m).powi(2) + (l[2] - m).powi(2);
    let den = l[0] * l[0] + l[1] * l[1] + l[2] * l[2];
    if den == 0.0 {
        0.0
    } else {
        (1.5 * num / den).sqrt()
    }
}
