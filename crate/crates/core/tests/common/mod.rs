//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use ndarray::{Array2, ArrayView1};
use odxu_core::gbt::{NodeKind, Tree, TreeEnsemble};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Expected tree output when only the features in `known` (a bitmask) are
/// observed; unobserved splits average their children by cover.
fn conditional(tree: &Tree, node: usize, x: ArrayView1<f64>, known: u32) -> f64 {
    match tree.nodes[node].kind {
        NodeKind::Leaf { weight } => weight,
        NodeKind::Split {
            feature,
            threshold,
            left,
            right,
            ..
        } => {
            if known & (1 << feature) != 0 {
                conditional(tree, if x[feature] < threshold { left } else { right }, x, known)
            } else {
                let (cl, cr) = (tree.nodes[left].cover, tree.nodes[right].cover);
                (cl * conditional(tree, left, x, known) + cr * conditional(tree, right, x, known)) / (cl + cr)
            }
        }
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|v| v as f64).product()
}

/// Shapley values of the class margin by enumerating every coalition.
pub fn brute_force_shap(model: &TreeEnsemble, x: &[f64], class: usize) -> Vec<f64> {
    let d = model.n_features();
    assert!(d <= 16);
    let x = ArrayView1::from(x);
    let value = |mask: u32| -> f64 {
        model
            .trees()
            .iter()
            .filter(|t| t.class == class)
            .map(|t| conditional(t, 0, x, mask))
            .sum()
    };
    let values: Vec<f64> = (0..1u32 << d).map(value).collect();
    let mut phi = vec![0.0; d];
    for (i, p) in phi.iter_mut().enumerate() {
        for s in 0..1u32 << d {
            if s & (1 << i) != 0 {
                continue;
            }
            let size = s.count_ones() as usize;
            let w = factorial(size) * factorial(d - size - 1) / factorial(d);
            *p += w * (values[(s | (1 << i)) as usize] - values[s as usize]);
        }
    }
    phi
}

/// Per-feature sum of split gains, walking trees and nodes in stored order.
pub fn walk_gain(model: &TreeEnsemble) -> Vec<f64> {
    let mut g = vec![0.0; model.n_features()];
    for t in model.trees() {
        for n in &t.nodes {
            if let NodeKind::Split { feature, gain, .. } = n.kind {
                g[feature] += gain;
            }
        }
    }
    g
}

/// Fraction of (positive, negative) pairs ordered correctly, ties half.
pub fn pairwise_auroc(scores: &[f64], labels: &[bool]) -> f64 {
    let mut num = 0.0;
    let (mut p, mut n) = (0usize, 0usize);
    for (i, &li) in labels.iter().enumerate() {
        if li {
            p += 1;
        } else {
            n += 1;
        }
        if !li {
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if lj {
                continue;
            }
            if scores[i] > scores[j] {
                num += 1.0;
            } else if scores[i] == scores[j] {
                num += 0.5;
            }
        }
    }
    num / (p as f64 * n as f64)
}

/// Random tabular fixture: labels depend on the first features through a
/// few thresholds plus noise.
pub fn tabular(n: usize, d: usize, k: usize, seed: u64) -> (Array2<f64>, Vec<usize>) {
    let mut r = rng(seed);
    let x = Array2::from_shape_fn((n, d), |_| (r.random_range(0..20) as f64) / 4.0);
    let y = x
        .rows()
        .into_iter()
        .map(|row| {
            let s = row[0] + if d > 1 { 0.5 * row[1] } else { 0.0 };
            let noise = r.random_range(0.0..1.5);
            ((s + noise) as usize) % k
        })
        .collect();
    (x, y)
}
