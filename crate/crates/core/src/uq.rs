//! Uncertainty scores for base-classifier predictions: closed-form confidence
//! and entropy, and boosted metamodels trained to predict base-model errors.

use std::fmt;
use std::str::FromStr;

use ndarray::{s, Array2, ArrayView2, Axis};
use rand::seq::{IndexedRandom, SliceRandom};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, OdxuError, Result};
use crate::gbt::{self, GbtParams, TreeEnsemble};
use crate::rng::{seeded, stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    /// Higher means more trustworthy.
    Certainty,
    /// Higher means more likely wrong.
    Uncertainty,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UqScore {
    pub value: f64,
    pub polarity: Polarity,
}

impl UqScore {
    /// The score oriented so that larger values mean "more likely an error".
    pub fn as_uncertainty(&self) -> f64 {
        match self.polarity {
            Polarity::Certainty => -self.value,
            Polarity::Uncertainty => self.value,
        }
    }
}

const PROB_TOL: f64 = 1e-6;

fn check_probs(p: &[f64]) -> Result<()> {
    if p.len() < 2 {
        return invalid("probability vector needs at least 2 classes");
    }
    if p.iter().any(|&v| !(v >= 0.0)) {
        return invalid("probabilities must be non-negative");
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > PROB_TOL {
        return invalid(format!("probabilities sum to {sum}, not 1"));
    }
    Ok(())
}

/// Gap between the two largest probabilities.
pub fn confidence(p: &[f64]) -> Result<UqScore> {
    check_probs(p)?;
    let (mut first, mut second) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &v in p {
        if v > first {
            second = first;
            first = v;
        } else if v > second {
            second = v;
        }
    }
    Ok(UqScore {
        value: first - second,
        polarity: Polarity::Certainty,
    })
}

/// Shannon entropy in nats, with `0 ln 0 = 0`.
pub fn entropy(p: &[f64]) -> Result<UqScore> {
    check_probs(p)?;
    let h: f64 = p.iter().filter(|&&v| v > 0.0).map(|&v| -v * v.ln()).sum();
    Ok(UqScore {
        value: h.max(0.0),
        polarity: Polarity::Uncertainty,
    })
}

/// 1 where the base model's top class differs from the label, else 0.
pub fn meta_labels(base: &TreeEnsemble, features: ArrayView2<f64>, labels: &[usize]) -> Result<Vec<usize>> {
    if features.nrows() != labels.len() {
        return Err(OdxuError::DimensionMismatch {
            expected: features.nrows(),
            got: labels.len(),
        });
    }
    let pred = base.predict_classes(features)?;
    Ok(pred.iter().zip(labels).map(|(p, y)| usize::from(p != y)).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetaSet {
    pub features: Array2<f64>,
    /// 1 = base model wrong.
    pub labels: Vec<usize>,
    /// Row of the source matrix each sample came from.
    pub source_rows: Vec<usize>,
}

impl MetaSet {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_misclassified(&self) -> usize {
        self.labels.iter().filter(|&&y| y == 1).count()
    }

    fn subset(&self, idx: &[usize]) -> MetaSet {
        MetaSet {
            features: self.features.select(Axis(0), idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            source_rows: idx.iter().map(|&i| self.source_rows[i]).collect(),
        }
    }

    /// Stratified split into (train, test) with `train_fraction` of each
    /// label in the first part.
    pub fn split(&self, train_fraction: f64, seed: u64) -> Result<(MetaSet, MetaSet)> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return invalid(format!("train fraction {train_fraction} outside (0, 1)"));
        }
        let mut rng = seeded(seed, stream::META_SET);
        let (mut train, mut test) = (Vec::new(), Vec::new());
        for class in [0, 1] {
            let mut idx: Vec<usize> = (0..self.len()).filter(|&i| self.labels[i] == class).collect();
            idx.shuffle(&mut rng);
            let cut = (idx.len() as f64 * train_fraction).round() as usize;
            train.extend_from_slice(&idx[..cut]);
            test.extend_from_slice(&idx[cut..]);
        }
        train.sort_unstable();
        test.sort_unstable();
        Ok((self.subset(&train), self.subset(&test)))
    }
}

/// Keeps every misclassified row and `ratio` times as many correctly
/// classified rows (or all of them if fewer exist), in shuffled order.
pub fn build_meta_set(
    base: &TreeEnsemble,
    features: ArrayView2<f64>,
    labels: &[usize],
    ratio: usize,
    seed: u64,
) -> Result<MetaSet> {
    let y_m = meta_labels(base, features, labels)?;
    let wrong: Vec<usize> = (0..y_m.len()).filter(|&i| y_m[i] == 1).collect();
    if wrong.is_empty() {
        return Err(OdxuError::NoMisclassified);
    }
    let right: Vec<usize> = (0..y_m.len()).filter(|&i| y_m[i] == 0).collect();
    let mut rng = seeded(seed, stream::META_SET);
    let take = (ratio * wrong.len()).min(right.len());
    let mut rows: Vec<usize> = right.choose_multiple(&mut rng, take).copied().collect();
    rows.extend_from_slice(&wrong);
    rows.shuffle(&mut rng);
    Ok(MetaSet {
        features: features.select(Axis(0), &rows),
        labels: rows.iter().map(|&i| y_m[i]).collect(),
        source_rows: rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Recipe {
    Prob,
    Shap,
    Ig,
}

impl Recipe {
    pub const ALL: [Recipe; 3] = [Recipe::Prob, Recipe::Shap, Recipe::Ig];

    pub fn tag(self) -> &'static str {
        match self {
            Recipe::Prob => "prob",
            Recipe::Shap => "shap",
            Recipe::Ig => "ig",
        }
    }

    /// Column count of the augmented input for `d` base features and `k`
    /// classes.
    pub fn width(self, d: usize, k: usize) -> usize {
        match self {
            Recipe::Prob => d + k + 1,
            Recipe::Shap => d + d,
            Recipe::Ig => d + k + d,
        }
    }
}

impl fmt::Display for Recipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Recipe {
    type Err = OdxuError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "prob" => Ok(Recipe::Prob),
            "shap" => Ok(Recipe::Shap),
            "ig" => Ok(Recipe::Ig),
            _ => invalid(format!("unknown metamodel recipe `{s}` (expected prob, shap or ig)")),
        }
    }
}

/// Appends recipe-specific columns to the base features:
/// prob: probabilities sorted descending, then the confidence gap;
/// shap: SHAP values of the predicted class;
/// ig: sorted probabilities, then the base model's gain vector on every row.
pub fn augment(recipe: Recipe, base: &TreeEnsemble, x_b: ArrayView2<f64>) -> Result<Array2<f64>> {
    let (n, d, k) = (x_b.nrows(), x_b.ncols(), base.n_classes());
    let probs = base.predict_proba_matrix(x_b)?;
    let mut out = Array2::zeros((n, recipe.width(d, k)));
    out.slice_mut(s![.., ..d]).assign(&x_b);
    let gain = base.gain_vector();
    for i in 0..n {
        let p = probs.row(i);
        match recipe {
            Recipe::Prob | Recipe::Ig => {
                let mut sorted: Vec<f64> = p.to_vec();
                sorted.sort_by(|a, b| b.total_cmp(a));
                for (j, v) in sorted.iter().enumerate() {
                    out[[i, d + j]] = *v;
                }
                if recipe == Recipe::Prob {
                    out[[i, d + k]] = sorted[0] - sorted[1];
                } else {
                    for (j, g) in gain.iter().enumerate() {
                        out[[i, d + k + j]] = *g;
                    }
                }
            }
            Recipe::Shap => {
                let predicted = crate::argmax(p.iter().copied());
                let row = x_b.row(i).to_vec();
                let (phi, _) = base.shap_values(&row, predicted)?;
                for (j, v) in phi.iter().enumerate() {
                    out[[i, d + j]] = *v;
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetamodelBundle {
    pub recipe: Recipe,
    pub model: TreeEnsemble,
    /// Fingerprint of the base classifier this metamodel explains.
    pub base_ref: String,
    /// Scores above this mark a prediction as suspicious.
    pub threshold: f64,
}

pub const DEFAULT_SUSPICIOUS_THRESHOLD: f64 = 0.5;

impl MetamodelBundle {
    pub fn is_suspicious(&self, z: f64) -> bool {
        z > self.threshold
    }
}

/// SHA-256 of the serialized ensemble, hex encoded.
pub fn base_fingerprint(base: &TreeEnsemble) -> String {
    hex::encode(Sha256::digest(crate::checkpoint::encode_ensemble(base)))
}

pub fn meta_fit(recipe: Recipe, base: &TreeEnsemble, meta_set: &MetaSet, params: &GbtParams) -> Result<MetamodelBundle> {
    let x = augment(recipe, base, meta_set.features.view())?;
    let model = gbt::fit(x.view(), &meta_set.labels, 2, params)?;
    Ok(MetamodelBundle {
        recipe,
        model,
        base_ref: base_fingerprint(base),
        threshold: DEFAULT_SUSPICIOUS_THRESHOLD,
    })
}

/// Probability that the base model errs on each row of `x_b`.
pub fn meta_score(bundle: &MetamodelBundle, base: &TreeEnsemble, x_b: ArrayView2<f64>) -> Result<Vec<f64>> {
    if bundle.base_ref != base_fingerprint(base) {
        return Err(OdxuError::MetamodelMismatch(format!(
            "{} metamodel was trained for base {}, not this one",
            bundle.recipe, bundle.base_ref
        )));
    }
    let width = bundle.recipe.width(x_b.ncols(), base.n_classes());
    if bundle.model.n_features() != width {
        return Err(OdxuError::MetamodelMismatch(format!(
            "{} recipe expects {} columns but the metamodel was fitted on {}",
            bundle.recipe,
            width,
            bundle.model.n_features()
        )));
    }
    let x = augment(bundle.recipe, base, x_b)?;
    let p = bundle.model.predict_proba_matrix(x.view())?;
    Ok(p.column(1).to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn confidence_cases() {
        assert_abs_diff_eq!(confidence(&[0.7, 0.2, 0.1]).unwrap().value, 0.5, epsilon = 1e-15);
        assert_eq!(confidence(&[0.0, 1.0, 0.0]).unwrap().value, 1.0);
        assert_eq!(confidence(&[0.25; 4]).unwrap().value, 0.0);
        assert!(confidence(&[1.0]).is_err());
        assert!(confidence(&[0.5, 0.6]).is_err());
    }

    #[test]
    fn entropy_cases() {
        assert_eq!(entropy(&[0.0, 1.0]).unwrap().value, 0.0);
        assert_abs_diff_eq!(entropy(&[0.25; 4]).unwrap().value, 4f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(entropy(&[0.5, 0.5, 0.0, 0.0]).unwrap().value, 2f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn recipe_tags() {
        for r in Recipe::ALL {
            assert_eq!(r.tag().parse::<Recipe>().unwrap(), r);
        }
        assert!("lime".parse::<Recipe>().is_err());
        assert_eq!(Recipe::Prob.width(12, 10), 23);
        assert_eq!(Recipe::Shap.width(12, 10), 24);
        assert_eq!(Recipe::Ig.width(12, 10), 34);
    }
}
