//! Attack-recognition metrics, ranking metrics for uncertainty scores, the
//! open-set evaluation harness, and report rendering.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{ArrayView2, Axis};
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, OdxuError, Result};
use crate::gbt::TreeEnsemble;
use crate::rng::{seeded, stream};
use crate::transfer::GridReport;
use crate::uq::{self, MetamodelBundle};

/// Counts for a multiclass prediction plus its benign/attack collapse, where
/// "positive" means attack.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionSummary {
    /// `matrix[truth][predicted]`.
    pub matrix: Vec<Vec<usize>>,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionSummary {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub multiclass_accuracy: f64,
    pub binary_accuracy: f64,
    /// FN / (FN + TP): attacks predicted benign over all attacks.
    pub misclassified_positive_rate: f64,
    /// FN / (FN + TN).
    pub false_omission_rate: f64,
    /// F1 of the attack class after the binary collapse.
    pub f1: f64,
    /// Binary accuracy on the samples whose uncertainty score is below
    /// `competence_threshold`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub competence: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub competence_threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub competence_coverage: Option<f64>,
    pub confusion: ConfusionSummary,
}

/// `uncertainty` pairs a per-sample error score with the threshold below
/// which a sample counts as high-certainty; it enables the competence metric.
pub fn classification_metrics(
    preds: &[usize],
    labels: &[usize],
    n_classes: usize,
    benign: usize,
    uncertainty: Option<(&[f64], f64)>,
) -> Result<ClassificationMetrics> {
    if labels.is_empty() {
        return invalid("no predictions to evaluate");
    }
    if preds.len() != labels.len() {
        return Err(OdxuError::DimensionMismatch {
            expected: labels.len(),
            got: preds.len(),
        });
    }
    if benign >= n_classes {
        return Err(OdxuError::ClassOutOfRange {
            index: benign,
            n_classes,
        });
    }
    let mut matrix = vec![vec![0usize; n_classes]; n_classes];
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    let mut exact = 0;
    let mut binary_hit = Vec::with_capacity(labels.len());
    for (&p, &y) in preds.iter().zip(labels) {
        if p >= n_classes || y >= n_classes {
            return Err(OdxuError::ClassOutOfRange {
                index: p.max(y),
                n_classes,
            });
        }
        matrix[y][p] += 1;
        exact += usize::from(p == y);
        let (actual, flagged) = (y != benign, p != benign);
        match (actual, flagged) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (false, false) => tn += 1,
            (true, false) => fn_ += 1,
        }
        binary_hit.push(actual == flagged);
    }
    let n = labels.len();
    let (competence, competence_threshold, competence_coverage) = match uncertainty {
        Some((z, threshold)) => {
            if z.len() != n {
                return Err(OdxuError::DimensionMismatch { expected: n, got: z.len() });
            }
            let kept: Vec<bool> = z
                .iter()
                .zip(&binary_hit)
                .filter(|(&zi, _)| zi < threshold)
                .map(|(_, &h)| h)
                .collect();
            let hits = kept.iter().filter(|&&h| h).count();
            (Some(ratio(hits, kept.len())), Some(threshold), Some(ratio(kept.len(), n)))
        }
        None => (None, None, None),
    };
    Ok(ClassificationMetrics {
        multiclass_accuracy: ratio(exact, n),
        binary_accuracy: ratio(tp + tn, n),
        misclassified_positive_rate: ratio(fn_, fn_ + tp),
        false_omission_rate: ratio(fn_, fn_ + tn),
        f1: ratio(2 * tp, 2 * tp + fp + fn_),
        competence,
        competence_threshold,
        competence_coverage,
        confusion: ConfusionSummary {
            matrix,
            tp,
            fp,
            tn,
            fn_,
        },
    })
}

fn check_binary(scores: &[f64], labels: &[bool]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(OdxuError::DimensionMismatch {
            expected: labels.len(),
            got: scores.len(),
        });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return invalid("NaN score");
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return invalid("both positive and negative samples are required");
    }
    Ok((pos, neg))
}

/// Probability that a random positive outranks a random negative, ties
/// counting one half, from the rank sum of the positives with mid-ranks.
pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (pos, neg) = check_binary(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // Ranks i+1 ..= j+1 share their mean.
        let mid = (i + j + 2) as f64 / 2.0;
        rank_sum += mid * order[i..=j].iter().filter(|&&k| labels[k]).count() as f64;
        i = j + 1;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// True-positive rate at the smallest threshold whose true-negative rate
/// reaches `tn_target`. A sample is flagged positive when its score exceeds
/// the threshold.
pub fn tp_at_tn(scores: &[f64], labels: &[bool], tn_target: f64) -> Result<f64> {
    let (pos, neg) = check_binary(scores, labels)?;
    if !(0.0..=1.0).contains(&tn_target) {
        return invalid(format!("TN target {tn_target} outside [0, 1]"));
    }
    let mut negatives: Vec<f64> = scores.iter().zip(labels).filter(|(_, &l)| !l).map(|(&s, _)| s).collect();
    negatives.sort_by(f64::total_cmp);
    // Smallest count of negatives at or below the threshold meeting the target.
    let need = ((tn_target * neg as f64) - 1e-9).ceil().max(1.0) as usize;
    let threshold = negatives[need.min(neg) - 1];
    let hits = scores.iter().zip(labels).filter(|(&s, &l)| l && s > threshold).count();
    Ok(ratio(hits, pos))
}

pub const TN_TARGET: f64 = 0.95;
pub const MIN_UNKNOWNS: usize = 10;

/// Indices into the known and unknown pools forming an open-set test with
/// equal counts of each.
pub fn osr_pairing(n_known: usize, n_unknown: usize, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if n_unknown == 0 || n_known == 0 {
        return invalid("open-set evaluation needs known and unknown samples");
    }
    let m = n_known.min(n_unknown);
    let mut rng = seeded(seed, stream::OSR);
    let mut known = sample(&mut rng, n_known, m).into_vec();
    let mut unknown = sample(&mut rng, n_unknown, m).into_vec();
    known.sort_unstable();
    unknown.sort_unstable();
    Ok((known, unknown))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OsrResult {
    pub auroc: f64,
    pub tp_at_tn: f64,
    pub n_known: usize,
    pub n_unknown: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

fn unknown_warning(n_unknown: usize, n_known: usize) -> Option<String> {
    (n_unknown < MIN_UNKNOWNS).then(|| {
        let msg = format!(
            "only {n_unknown} unknown samples (fewer than {MIN_UNKNOWNS}) against {n_known} known; open-set metrics are unreliable"
        );
        log::warn!("{msg}");
        msg
    })
}

/// Open-set evaluation of arbitrary uncertainty scores (higher = more likely
/// unknown) on already paired sets.
pub fn osr_from_scores(known: &[f64], unknown: &[f64]) -> Result<OsrResult> {
    let mut scores = known.to_vec();
    scores.extend_from_slice(unknown);
    let mut labels = vec![false; known.len()];
    labels.extend(std::iter::repeat_n(true, unknown.len()));
    Ok(OsrResult {
        auroc: auroc(&scores, &labels)?,
        tp_at_tn: tp_at_tn(&scores, &labels, TN_TARGET)?,
        n_known: known.len(),
        n_unknown: unknown.len(),
        warning: unknown_warning(unknown.len(), known.len()),
    })
}

/// Scores an equal-count mix of metamodel-test knowns (label 0) and held-out
/// unknowns (label 1) with the metamodel.
pub fn osr_eval(
    meta: &MetamodelBundle,
    base: &TreeEnsemble,
    knowns: ArrayView2<f64>,
    unknowns: ArrayView2<f64>,
    seed: u64,
) -> Result<OsrResult> {
    let (ki, ui) = osr_pairing(knowns.nrows(), unknowns.nrows(), seed)?;
    let zk = uq::meta_score(meta, base, knowns.select(Axis(0), &ki).view())?;
    let zu = uq::meta_score(meta, base, unknowns.select(Axis(0), &ui).view())?;
    let mut res = osr_from_scores(&zk, &zu)?;
    if res.warning.is_none() {
        res.warning = unknown_warning(unknowns.nrows(), knowns.nrows());
    }
    Ok(res)
}

pub const REPORT_SCHEMA: &str = "odxu-report/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRow {
    pub case: usize,
    pub ae: String,
    pub cluster: String,
    pub clf: String,
    pub portion: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetrics {
    pub model: String,
    pub metrics: ClassificationMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UqRow {
    pub method: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub misclassification_auroc: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub misclassification_tp_at_tn: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub osr: Option<OsrResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub scenarios: Vec<ScenarioRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub classification: Vec<ModelMetrics>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub uq: Vec<UqRow>,
    /// Formula used for every metric name that appears in the report.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub definitions: BTreeMap<String, String>,
}

impl Default for Report {
    fn default() -> Self {
        Self {
            schema: REPORT_SCHEMA.to_string(),
            scenarios: Vec::new(),
            grid: None,
            classification: Vec::new(),
            uq: Vec::new(),
            definitions: BTreeMap::new(),
        }
    }
}

pub fn metric_definitions() -> BTreeMap<String, String> {
    [
        ("multiclass_accuracy", "exact class matches / samples"),
        ("binary_accuracy", "(TP + TN) / samples, positive = any attack class"),
        ("misclassified_positive_rate", "FN / (FN + TP)"),
        ("false_omission_rate", "FN / (FN + TN)"),
        ("f1", "2TP / (2TP + FP + FN)"),
        ("competence", "binary accuracy on samples with metamodel z < competence_threshold"),
        ("auroc", "Mann-Whitney rank-sum statistic, ties counted 1/2"),
        ("tp_at_tn", "TPR at the smallest threshold with TNR >= 0.95; positive iff score > threshold"),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect()
}

/// Four decimals without the leading zero for values in (-1, 1): `.9845`.
pub fn fmt_metric(v: f64) -> String {
    let s = format!("{v:.4}");
    if let Some(rest) = s.strip_prefix("0.") {
        format!(".{rest}")
    } else if let Some(rest) = s.strip_prefix("-0.") {
        format!("-.{rest}")
    } else {
        s
    }
}

/// Left-aligned first column, right-aligned others, two-space gaps.
pub fn render_table(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for (i, row) in rows.iter().enumerate() {
        let cells: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, s)| {
                if c == 0 {
                    format!("{s:<w$}", w = widths[c])
                } else {
                    format!("{s:>w$}", w = widths[c])
                }
            })
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
        if i == 0 {
            let total = widths.iter().sum::<usize>() + 2 * cols.saturating_sub(1);
            out.push_str(&"-".repeat(total));
            out.push('\n');
        }
    }
    out
}

fn opt_metric(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), fmt_metric)
}

impl Report {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let r: Report = serde_json::from_str(s)?;
        if r.schema != REPORT_SCHEMA {
            return invalid(format!("unsupported report schema `{}`", r.schema));
        }
        Ok(r)
    }

    /// Human-readable tables; sections without data are left out.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if !self.scenarios.is_empty() {
            out.push_str("Transfer scenarios (multiclass accuracy)\n");
            let mut rows = vec![vec!["Case".into(), "AE".into(), "Clustering".into(), "Classifier".into(), "Portion".into(), "Accuracy".into()]];
            for s in &self.scenarios {
                rows.push(vec![
                    s.case.to_string(),
                    s.ae.clone(),
                    s.cluster.clone(),
                    s.clf.clone(),
                    format!("{:.0}%", s.portion * 100.0),
                    fmt_metric(s.accuracy),
                ]);
            }
            out.push_str(&render_table(&rows));
            out.push('\n');
        }
        if let Some(g) = &self.grid {
            out.push_str(&format!("Early-stopping grid (case {})\n", g.case));
            out.push_str(&g.to_table());
            out.push('\n');
        }
        if !self.classification.is_empty() {
            out.push_str("Attack recognition\n");
            let mut header = vec!["Metric".to_string()];
            header.extend(self.classification.iter().map(|m| m.model.clone()));
            let mut rows = vec![header];
            type Getter = fn(&ClassificationMetrics) -> Option<f64>;
            let metrics: [(&str, Getter); 6] = [
                ("Multiclass Accuracy", |m| Some(m.multiclass_accuracy)),
                ("Binary Accuracy", |m| Some(m.binary_accuracy)),
                ("Misclassified Positive Rate", |m| Some(m.misclassified_positive_rate)),
                ("False Omission Rate", |m| Some(m.false_omission_rate)),
                ("F1 Score", |m| Some(m.f1)),
                ("Competence", |m| m.competence),
            ];
            for (name, get) in metrics {
                let mut row = vec![name.to_string()];
                row.extend(self.classification.iter().map(|m| opt_metric(get(&m.metrics))));
                rows.push(row);
            }
            out.push_str(&render_table(&rows));
            out.push('\n');
        }
        if !self.uq.is_empty() {
            out.push_str("Uncertainty quantification\n");
            let mut rows = vec![vec![
                "Method".into(),
                "Misclassification AUROC".into(),
                "Misclassification TP@(TN=.95)".into(),
                "Unknown AUROC".into(),
                "Unknown TP@(TN=.95)".into(),
            ]];
            for u in &self.uq {
                rows.push(vec![
                    u.method.clone(),
                    opt_metric(u.misclassification_auroc),
                    opt_metric(u.misclassification_tp_at_tn),
                    opt_metric(u.osr.as_ref().map(|o| o.auroc)),
                    opt_metric(u.osr.as_ref().map(|o| o.tp_at_tn)),
                ]);
            }
            out.push_str(&render_table(&rows));
            out.push('\n');
        }
        out
    }
}

/// Writes `report.json` and `report.txt` into `dir`.
pub fn emit_report(report: &Report, dir: impl AsRef<Path>) -> Result<(PathBuf, PathBuf)> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let json = dir.join("report.json");
    let text = dir.join("report.txt");
    fs::write(&json, report.to_json()?)?;
    fs::write(&text, report.to_text())?;
    Ok((json, text))
}
