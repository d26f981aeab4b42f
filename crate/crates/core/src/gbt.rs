//! Gradient-boosted decision trees with a multiclass softmax objective.
//!
//! Each boosting round fits one regression tree per class on the second-order
//! statistics of softmax cross-entropy (`g = p − y`, `h = p(1 − p)`). Splits are
//! found by exact greedy search over sorted unique feature values. Trees also
//! carry per-node cover (hessian sums), which path-dependent tree SHAP uses.

use std::collections::BTreeMap;

use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::error::{invalid, OdxuError, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        /// Regularized loss reduction of this split (already net of γ).
        gain: f64,
    },
    Leaf {
        weight: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    pub kind: NodeKind,
    /// Sum of hessians of the training rows reaching this node.
    pub cover: f64,
}

/// Nodes are stored in pre-order; the root is node 0. Samples with
/// `x[feature] < threshold` go left.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub class: usize,
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    fn leaf_index(&self, x: ArrayView1<f64>) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i].kind {
                NodeKind::Leaf { .. } => return i,
                NodeKind::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => i = if x[feature] < threshold { left } else { right },
            }
        }
    }

    pub fn predict(&self, x: ArrayView1<f64>) -> f64 {
        match self.nodes[self.leaf_index(x)].kind {
            NodeKind::Leaf { weight } => weight,
            NodeKind::Split { .. } => unreachable!(),
        }
    }

    /// Cover-weighted mean leaf value: the tree's output with no features known.
    pub fn expected_value(&self) -> f64 {
        self.expected_from(0)
    }

    fn expected_from(&self, i: usize) -> f64 {
        let node = &self.nodes[i];
        match node.kind {
            NodeKind::Leaf { weight } => weight,
            NodeKind::Split { left, right, .. } => {
                (self.nodes[left].cover * self.expected_from(left)
                    + self.nodes[right].cover * self.expected_from(right))
                    / node.cover
            }
        }
    }

    pub fn is_single_leaf(&self) -> bool {
        self.nodes.len() == 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GbtParams {
    pub n_rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub reg_lambda: f64,
    pub gamma: f64,
    pub min_child_weight: f64,
    pub base_score: f64,
}

impl Default for GbtParams {
    fn default() -> Self {
        Self {
            n_rounds: 100,
            max_depth: 6,
            learning_rate: 0.3,
            reg_lambda: 1.0,
            gamma: 0.0,
            min_child_weight: 1.0,
            base_score: 0.5,
        }
    }
}

impl GbtParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return invalid("learning_rate must be > 0");
        }
        if !(self.reg_lambda >= 0.0 && self.gamma >= 0.0 && self.min_child_weight >= 0.0) {
            return invalid("reg_lambda, gamma and min_child_weight must be >= 0");
        }
        if !self.base_score.is_finite() {
            return invalid("base_score must be finite");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeEnsemble {
    pub(crate) trees: Vec<Tree>,
    pub(crate) n_classes: usize,
    pub(crate) n_features: usize,
    pub(crate) params: GbtParams,
    pub(crate) feature_gain: Vec<f64>,
    /// Training log-loss after each round (including rounds added by
    /// fine-tuning on other data).
    pub(crate) train_loss: Vec<f64>,
}

/// Hessian floor keeping covers strictly positive.
const MIN_HESSIAN: f64 = 1e-16;

struct Grower<'x, 'g> {
    x: ArrayView2<'x, f64>,
    grad: &'g [f64],
    hess: &'g [f64],
    params: &'g GbtParams,
    nodes: Vec<TreeNode>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl Grower<'_, '_> {
    fn score(&self, g: f64, h: f64) -> f64 {
        g * g / (h + self.params.reg_lambda)
    }

    fn find_split(&self, rows: &[usize], g_tot: f64, h_tot: f64) -> Option<BestSplit> {
        let mut best: Option<BestSplit> = None;
        let parent = self.score(g_tot, h_tot);
        let mut sorted = rows.to_vec();
        for f in 0..self.x.ncols() {
            sorted.sort_by(|&a, &b| self.x[[a, f]].total_cmp(&self.x[[b, f]]));
            let (mut gl, mut hl) = (0.0, 0.0);
            for w in 0..sorted.len() - 1 {
                let i = sorted[w];
                gl += self.grad[i];
                hl += self.hess[i];
                let (v, next) = (self.x[[i, f]], self.x[[sorted[w + 1], f]]);
                if v == next {
                    continue;
                }
                let (gr, hr) = (g_tot - gl, h_tot - hl);
                if hl < self.params.min_child_weight || hr < self.params.min_child_weight {
                    continue;
                }
                let gain = 0.5 * (self.score(gl, hl) + self.score(gr, hr) - parent) - self.params.gamma;
                if best.as_ref().is_none_or(|b| gain > b.gain) {
                    best = Some(BestSplit {
                        feature: f,
                        threshold: v + (next - v) / 2.0,
                        gain,
                    });
                }
            }
        }
        best.filter(|b| b.gain > 0.0)
    }

    fn grow(&mut self, rows: &[usize], depth: usize) -> usize {
        let g: f64 = rows.iter().map(|&i| self.grad[i]).sum();
        let h: f64 = rows.iter().map(|&i| self.hess[i]).sum();
        let idx = self.nodes.len();
        let leaf = NodeKind::Leaf {
            weight: -g / (h + self.params.reg_lambda) * self.params.learning_rate,
        };
        self.nodes.push(TreeNode { kind: leaf, cover: h });
        if depth >= self.params.max_depth || rows.len() < 2 {
            return idx;
        }
        let Some(split) = self.find_split(rows, g, h) else {
            return idx;
        };
        let (l_rows, r_rows): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&i| self.x[[i, split.feature]] < split.threshold);
        let left = self.grow(&l_rows, depth + 1);
        let right = self.grow(&r_rows, depth + 1);
        self.nodes[idx].kind = NodeKind::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
            gain: split.gain,
        };
        idx
    }
}

fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

fn log_loss(margins: &Array2<f64>, labels: &[usize]) -> f64 {
    let mut total = 0.0;
    for (row, &y) in margins.rows().into_iter().zip(labels) {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        total += lse - row[y];
    }
    total / labels.len().max(1) as f64
}

fn check_training_data(features: ArrayView2<f64>, labels: &[usize], n_classes: usize) -> Result<()> {
    if features.nrows() < 2 {
        return invalid("boosting needs at least 2 samples");
    }
    if features.nrows() != labels.len() {
        return Err(OdxuError::DimensionMismatch {
            expected: features.nrows(),
            got: labels.len(),
        });
    }
    if let Some(&y) = labels.iter().find(|&&y| y >= n_classes) {
        return Err(OdxuError::ClassOutOfRange { index: y, n_classes });
    }
    if !features.iter().all(|v| v.is_finite()) {
        return invalid("non-finite feature value");
    }
    Ok(())
}

/// Fits a fresh ensemble. `n_classes` must cover every label.
pub fn fit(features: ArrayView2<f64>, labels: &[usize], n_classes: usize, params: &GbtParams) -> Result<TreeEnsemble> {
    params.validate()?;
    if n_classes < 2 {
        return invalid("need at least 2 classes");
    }
    check_training_data(features, labels, n_classes)?;
    let model = TreeEnsemble {
        trees: Vec::new(),
        n_classes,
        n_features: features.ncols(),
        params: params.clone(),
        feature_gain: vec![0.0; features.ncols()],
        train_loss: Vec::new(),
    };
    Ok(boost(model, features, labels, params.n_rounds))
}

/// Fine-tuning: keeps existing trees fixed and appends `n_rounds` rounds fitted
/// to the residual gradients on new data.
pub fn continue_fit(model: &TreeEnsemble, features: ArrayView2<f64>, labels: &[usize], n_rounds: usize) -> Result<TreeEnsemble> {
    if features.ncols() != model.n_features {
        return Err(OdxuError::DimensionMismatch {
            expected: model.n_features,
            got: features.ncols(),
        });
    }
    check_training_data(features, labels, model.n_classes)?;
    Ok(boost(model.clone(), features, labels, n_rounds))
}

fn boost(mut model: TreeEnsemble, x: ArrayView2<f64>, labels: &[usize], n_rounds: usize) -> TreeEnsemble {
    let (n, k) = (x.nrows(), model.n_classes);
    let mut margins = model.margins(x);
    let rows: Vec<usize> = (0..n).collect();
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let params = model.params.clone();
    for _ in 0..n_rounds {
        let mut probs = margins.clone();
        for mut row in probs.rows_mut() {
            softmax_in_place(row.as_slice_mut().expect("row-major"));
        }
        let mut round = Vec::with_capacity(k);
        for c in 0..k {
            for i in 0..n {
                let p = probs[[i, c]];
                grad[i] = p - if labels[i] == c { 1.0 } else { 0.0 };
                hess[i] = (p * (1.0 - p)).max(MIN_HESSIAN);
            }
            let mut grower = Grower {
                x,
                grad: &grad,
                hess: &hess,
                params: &params,
                nodes: Vec::new(),
            };
            grower.grow(&rows, 0);
            round.push(Tree {
                class: c,
                nodes: grower.nodes,
            });
        }
        for tree in &round {
            for (i, row) in x.rows().into_iter().enumerate() {
                margins[[i, tree.class]] += tree.predict(row);
            }
        }
        model.trees.extend(round);
        model.train_loss.push(log_loss(&margins, labels));
    }
    model.feature_gain = model.recompute_gain();
    model
}

impl TreeEnsemble {
    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn params(&self) -> &GbtParams {
        &self.params
    }

    pub fn train_loss(&self) -> &[f64] {
        &self.train_loss
    }

    pub fn rounds(&self) -> usize {
        self.trees.len() / self.n_classes
    }

    pub fn from_parts(
        trees: Vec<Tree>,
        n_classes: usize,
        n_features: usize,
        params: GbtParams,
        train_loss: Vec<f64>,
    ) -> Result<Self> {
        for t in &trees {
            if t.class >= n_classes || t.nodes.is_empty() {
                return invalid("tree class out of range or empty tree");
            }
            for node in &t.nodes {
                match node.kind {
                    NodeKind::Split {
                        feature,
                        threshold,
                        left,
                        right,
                        gain,
                    } => {
                        if feature >= n_features
                            || left >= t.nodes.len()
                            || right >= t.nodes.len()
                            || !threshold.is_finite()
                            || gain.is_nan()
                        {
                            return invalid("malformed split node");
                        }
                    }
                    NodeKind::Leaf { weight } if !weight.is_finite() => {
                        return invalid("non-finite leaf weight");
                    }
                    NodeKind::Leaf { .. } => {}
                }
            }
        }
        let mut model = Self {
            trees,
            n_classes,
            n_features,
            params,
            feature_gain: Vec::new(),
            train_loss,
        };
        model.feature_gain = model.recompute_gain();
        Ok(model)
    }

    fn margins(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut m = Array2::from_elem((x.nrows(), self.n_classes), self.params.base_score);
        for (i, row) in x.rows().into_iter().enumerate() {
            for t in &self.trees {
                m[[i, t.class]] += t.predict(row);
            }
        }
        m
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        if d != self.n_features {
            return Err(OdxuError::DimensionMismatch {
                expected: self.n_features,
                got: d,
            });
        }
        Ok(())
    }

    /// Per-class raw scores before the softmax.
    pub fn predict_margin(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x.len())?;
        let row = ArrayView1::from(x);
        let mut m = vec![self.params.base_score; self.n_classes];
        for t in &self.trees {
            m[t.class] += t.predict(row);
        }
        Ok(m)
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut m = self.predict_margin(x)?;
        softmax_in_place(&mut m);
        Ok(m)
    }

    /// Class probabilities for every row.
    pub fn predict_proba_matrix(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_dim(x.ncols())?;
        let mut m = self.margins(x);
        for mut row in m.rows_mut() {
            softmax_in_place(row.as_slice_mut().expect("row-major"));
        }
        Ok(m)
    }

    pub fn predict_classes(&self, x: ArrayView2<f64>) -> Result<Vec<usize>> {
        let p = self.predict_proba_matrix(x)?;
        Ok(p.rows().into_iter().map(|r| crate::argmax(r.iter().copied())).collect())
    }

    /// Cumulative split gain per feature.
    pub fn gain_vector(&self) -> &[f64] {
        &self.feature_gain
    }

    /// Walks every tree and sums split gains per feature.
    pub fn recompute_gain(&self) -> Vec<f64> {
        let mut gain = vec![0.0; self.n_features];
        for t in &self.trees {
            for node in &t.nodes {
                if let NodeKind::Split { feature, gain: g, .. } = node.kind {
                    gain[feature] += g;
                }
            }
        }
        gain
    }

    /// SHAP value of the margin for class `class` (the `base value`).
    pub fn base_value(&self, class: usize) -> f64 {
        self.params.base_score
            + self
                .trees
                .iter()
                .filter(|t| t.class == class)
                .map(Tree::expected_value)
                .sum::<f64>()
    }

    /// Exact path-dependent tree SHAP for the margin of `class`. Returns the
    /// per-feature attributions and the base value; they sum to the margin.
    pub fn shap_values(&self, x: &[f64], class: usize) -> Result<(Vec<f64>, f64)> {
        self.check_dim(x.len())?;
        if class >= self.n_classes {
            return Err(OdxuError::ClassOutOfRange {
                index: class,
                n_classes: self.n_classes,
            });
        }
        let mut phi = vec![0.0; self.n_features];
        let row = ArrayView1::from(x);
        for t in self.trees.iter().filter(|t| t.class == class) {
            tree_shap(t, row, &mut phi);
        }
        Ok((phi, self.base_value(class)))
    }
}

#[derive(Debug, Clone, Copy)]
struct PathElement {
    feature: Option<usize>,
    zero_fraction: f64,
    one_fraction: f64,
    pweight: f64,
}

fn extend_path(path: &mut Vec<PathElement>, zero_fraction: f64, one_fraction: f64, feature: Option<usize>) {
    let depth = path.len();
    path.push(PathElement {
        feature,
        zero_fraction,
        one_fraction,
        pweight: if depth == 0 { 1.0 } else { 0.0 },
    });
    let denom = (depth + 1) as f64;
    for i in (0..depth).rev() {
        path[i + 1].pweight += one_fraction * path[i].pweight * (i + 1) as f64 / denom;
        path[i].pweight = zero_fraction * path[i].pweight * (depth - i) as f64 / denom;
    }
}

fn unwind_path(path: &mut Vec<PathElement>, index: usize) {
    let depth = path.len() - 1;
    let one = path[index].one_fraction;
    let zero = path[index].zero_fraction;
    let denom = (depth + 1) as f64;
    let mut next_one = path[depth].pweight;
    for i in (0..depth).rev() {
        if one != 0.0 {
            let tmp = path[i].pweight;
            path[i].pweight = next_one * denom / ((i + 1) as f64 * one);
            next_one = tmp - path[i].pweight * zero * (depth - i) as f64 / denom;
        } else {
            path[i].pweight = path[i].pweight * denom / (zero * (depth - i) as f64);
        }
    }
    for i in index..depth {
        path[i].feature = path[i + 1].feature;
        path[i].zero_fraction = path[i + 1].zero_fraction;
        path[i].one_fraction = path[i + 1].one_fraction;
    }
    path.pop();
}

fn unwound_path_sum(path: &[PathElement], index: usize) -> f64 {
    let depth = path.len() - 1;
    let one = path[index].one_fraction;
    let zero = path[index].zero_fraction;
    let denom = (depth + 1) as f64;
    let mut next_one = path[depth].pweight;
    let mut total = 0.0;
    for i in (0..depth).rev() {
        if one != 0.0 {
            let tmp = next_one * denom / ((i + 1) as f64 * one);
            total += tmp;
            next_one = path[i].pweight - tmp * zero * (depth - i) as f64 / denom;
        } else if zero != 0.0 {
            total += path[i].pweight / zero / ((depth - i) as f64 / denom);
        }
    }
    total
}

fn tree_shap(tree: &Tree, x: ArrayView1<f64>, phi: &mut [f64]) {
    shap_recurse(tree, x, phi, 0, Vec::with_capacity(16), 1.0, 1.0, None);
}

#[allow(clippy::too_many_arguments)]
fn shap_recurse(
    tree: &Tree,
    x: ArrayView1<f64>,
    phi: &mut [f64],
    node: usize,
    mut path: Vec<PathElement>,
    zero_fraction: f64,
    one_fraction: f64,
    feature: Option<usize>,
) {
    extend_path(&mut path, zero_fraction, one_fraction, feature);
    let current = &tree.nodes[node];
    match current.kind {
        NodeKind::Leaf { weight } => {
            for i in 1..path.len() {
                let w = unwound_path_sum(&path, i);
                let el = path[i];
                if let Some(f) = el.feature {
                    phi[f] += w * (el.one_fraction - el.zero_fraction) * weight;
                }
            }
        }
        NodeKind::Split {
            feature: split,
            threshold,
            left,
            right,
            ..
        } => {
            let (hot, cold) = if x[split] < threshold { (left, right) } else { (right, left) };
            let mut incoming_zero = 1.0;
            let mut incoming_one = 1.0;
            if let Some(k) = (1..path.len()).find(|&k| path[k].feature == Some(split)) {
                incoming_zero = path[k].zero_fraction;
                incoming_one = path[k].one_fraction;
                unwind_path(&mut path, k);
            }
            let hot_frac = tree.nodes[hot].cover / current.cover;
            let cold_frac = tree.nodes[cold].cover / current.cover;
            shap_recurse(
                tree,
                x,
                phi,
                hot,
                path.clone(),
                hot_frac * incoming_zero,
                incoming_one,
                Some(split),
            );
            shap_recurse(tree, x, phi, cold, path, cold_frac * incoming_zero, 0.0, Some(split));
        }
    }
}

fn entropy_of_counts<'a>(counts: impl Iterator<Item = &'a usize>, total: usize) -> f64 {
    let n = total as f64;
    counts
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Classical information gain `H(I) − H(I | f)` in nats for a discrete feature.
pub fn classical_ig<T: Ord>(labels: &[usize], feature: &[T]) -> Result<f64> {
    if labels.is_empty() {
        return invalid("information gain of an empty set");
    }
    if labels.len() != feature.len() {
        return Err(OdxuError::DimensionMismatch {
            expected: labels.len(),
            got: feature.len(),
        });
    }
    let mut overall: BTreeMap<usize, usize> = BTreeMap::new();
    let mut by_value: BTreeMap<&T, BTreeMap<usize, usize>> = BTreeMap::new();
    for (&y, v) in labels.iter().zip(feature) {
        *overall.entry(y).or_default() += 1;
        *by_value.entry(v).or_default().entry(y).or_default() += 1;
    }
    let n = labels.len();
    let h = entropy_of_counts(overall.values(), n);
    let h_cond: f64 = by_value
        .values()
        .map(|counts| {
            let m: usize = counts.values().sum();
            m as f64 / n as f64 * entropy_of_counts(counts.values(), m)
        })
        .sum();
    Ok(h - h_cond)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn stump_data() -> (Array2<f64>, Vec<usize>) {
        let x = array![[0.1, 5.0], [0.2, 3.0], [0.3, 4.0], [0.4, 1.0], [0.6, 2.0], [0.7, 5.0], [0.8, 3.0], [0.9, 1.0]];
        (x, vec![0, 0, 0, 0, 1, 1, 1, 1])
    }

    #[test]
    fn separable_stump() {
        let (x, y) = stump_data();
        let params = GbtParams {
            n_rounds: 1,
            max_depth: 1,
            min_child_weight: 0.0,
            ..GbtParams::default()
        };
        let m = fit(x.view(), &y, 2, &params).unwrap();
        assert_eq!(m.trees().len(), 2);
        for t in m.trees() {
            match t.nodes[0].kind {
                NodeKind::Split { feature, threshold, .. } => {
                    assert_eq!(feature, 0);
                    assert_abs_diff_eq!(threshold, 0.5, epsilon = 1e-12);
                }
                _ => panic!("expected a stump"),
            }
        }
        assert_eq!(m.predict_classes(x.view()).unwrap(), y);
    }

    #[test]
    fn huge_gamma_gives_constant_model() {
        let (x, y) = stump_data();
        let params = GbtParams {
            n_rounds: 5,
            gamma: 1e9,
            ..GbtParams::default()
        };
        let m = fit(x.view(), &y, 2, &params).unwrap();
        assert!(m.trees().iter().all(Tree::is_single_leaf));
        let p0 = m.predict_proba(&[0.0, 0.0]).unwrap();
        let p1 = m.predict_proba(&[10.0, 10.0]).unwrap();
        assert_eq!(p0, p1);
        assert_abs_diff_eq!(p0[0], 0.5, epsilon = 1e-12);
        assert!(m.gain_vector().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn constant_model_converges_to_priors() {
        let x = Array2::zeros((10, 1));
        let y = vec![0, 0, 0, 0, 0, 0, 0, 1, 1, 2];
        let params = GbtParams {
            n_rounds: 300,
            reg_lambda: 0.0,
            min_child_weight: 0.0,
            ..GbtParams::default()
        };
        let m = fit(x.view(), &y, 3, &params).unwrap();
        let p = m.predict_proba(&[0.0]).unwrap();
        assert_abs_diff_eq!(p[0], 0.7, epsilon = 1e-6);
        assert_abs_diff_eq!(p[1], 0.2, epsilon = 1e-6);
        assert_abs_diff_eq!(p[2], 0.1, epsilon = 1e-6);
    }

    #[test]
    fn stump_shap_and_gain() {
        let (x, y) = stump_data();
        let params = GbtParams {
            n_rounds: 1,
            max_depth: 1,
            min_child_weight: 0.0,
            ..GbtParams::default()
        };
        let m = fit(x.view(), &y, 2, &params).unwrap();
        let (phi, base) = m.shap_values(&[0.2, 3.0], 1).unwrap();
        assert!(phi[0] != 0.0);
        assert_eq!(phi[1], 0.0);
        let margin = m.predict_margin(&[0.2, 3.0]).unwrap()[1];
        assert_abs_diff_eq!(base + phi.iter().sum::<f64>(), margin, epsilon = 1e-12);
        let g = m.gain_vector();
        assert!(g[0] > 0.0 && g[1] == 0.0);
        assert!(m.shap_values(&[0.2, 3.0], 2).is_err());
    }

    #[test]
    fn errors() {
        let (x, y) = stump_data();
        assert!(fit(x.view(), &[0, 5, 0, 0, 0, 0, 0, 0], 2, &GbtParams::default()).is_err());
        assert!(fit(x.slice(ndarray::s![..1, ..]), &y[..1], 2, &GbtParams::default()).is_err());
        let m = fit(x.view(), &y, 2, &GbtParams { n_rounds: 1, ..GbtParams::default() }).unwrap();
        assert!(m.predict_proba(&[1.0]).is_err());
    }

    #[test]
    fn classical_ig_cases() {
        let ln2 = std::f64::consts::LN_2;
        assert_abs_diff_eq!(classical_ig(&[0, 0, 1, 1], &['a', 'a', 'b', 'b']).unwrap(), ln2, epsilon = 1e-12);
        assert_abs_diff_eq!(classical_ig(&[0, 1, 0, 1], &[7, 7, 7, 7]).unwrap(), 0.0, epsilon = 1e-12);
        let labels = [0, 1, 2, 2, 1, 0];
        let h = entropy_of_counts([2usize, 2, 2].iter(), 6);
        assert_abs_diff_eq!(classical_ig(&labels, &labels).unwrap(), h, epsilon = 1e-12);
        assert!(classical_ig::<u8>(&[], &[]).is_err());
    }
}
