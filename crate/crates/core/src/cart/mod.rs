//! Exact, unrestricted CART classification trees with Gini splits.
//!
//! Split selection compares candidates with exact integer arithmetic, so ties are real
//! ties and the declared tie rule (lowest feature index, then lowest threshold) is
//! applied deterministically.

mod serial;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use serial::TreeJson;

#[derive(Debug, Error)]
pub enum CartError {
    #[error("cannot fit a tree on zero samples")]
    EmptyInput,
    #[error("{rows} feature rows but {labels} labels")]
    DimensionMismatch { rows: usize, labels: usize },
    #[error("feature value at row {row}, column {col} is not finite")]
    NonFinite { row: usize, col: usize },
    #[error("invalid tree: {0}")]
    InvalidTree(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = CartError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    /// Samples with `x[feature] <= threshold` go left.
    Internal { feature: usize, threshold: f64, left: usize, right: usize, sample_count: usize },
    Leaf { class_label: usize, sample_count: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    nodes: Vec<Node>,
    root: usize,
    num_features: usize,
    num_classes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeMetrics {
    pub n_leaf: usize,
    pub d_max: usize,
    pub train_accuracy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    /// (n_L·GI_L + n_R·GI_R) / n
    pub weighted_impurity: f64,
}

/// 1 − Σ (N_c / N)².
pub fn gini(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    assert!(n > 0, "gini of an empty node");
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

/// Σ c² / n as an exact fraction. Weighted child impurity is `1 − score / n_parent`,
/// so a larger score is a better split.
#[derive(Debug, Clone, Copy)]
struct Score {
    num: u128,
    den: u128,
}

impl Score {
    fn split(sq_left: u64, n_left: u64, sq_right: u64, n_right: u64) -> Self {
        Score {
            num: sq_left as u128 * n_right as u128 + sq_right as u128 * n_left as u128,
            den: n_left as u128 * n_right as u128,
        }
    }

    fn beats(&self, other: &Score) -> bool {
        self.num * other.den > other.num * self.den
    }

    fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

fn midpoint(lo: f32, hi: f32) -> f64 {
    let mid = (lo as f64 + hi as f64) / 2.0;
    // f32 values are exact in f64, so the midpoint is strictly between them.
    debug_assert!(mid > lo as f64 && mid < hi as f64);
    mid
}

/// Exhaustive split search over `columns` (feature-major: one row per feature),
/// restricted to `rows`. `scratch` is reused between calls.
fn search(
    columns: ArrayView2<'_, f32>,
    labels: &[usize],
    rows: &[usize],
    num_classes: usize,
    scratch: &mut Vec<(f32, usize)>,
) -> Option<(Split, Score)> {
    let n = rows.len();
    let mut totals = vec![0u64; num_classes];
    for &r in rows {
        totals[labels[r]] += 1;
    }
    let total_sq: u64 = totals.iter().map(|c| c * c).sum();

    let mut best: Option<(usize, f32, f32, Score)> = None;
    let mut left = vec![0u64; num_classes];
    for (feature, column) in columns.outer_iter().enumerate() {
        scratch.clear();
        scratch.extend(rows.iter().map(|&r| (column[r], labels[r])));
        scratch.sort_by(|a, b| a.0.total_cmp(&b.0));
        if scratch[0].0 == scratch[n - 1].0 {
            continue;
        }
        left.iter_mut().for_each(|c| *c = 0);
        let (mut sq_left, mut sq_right) = (0u64, total_sq);
        for i in 0..n - 1 {
            let (value, label) = scratch[i];
            let right_count = totals[label] - left[label];
            sq_left += 2 * left[label] + 1;
            sq_right -= 2 * right_count - 1;
            left[label] += 1;
            let next = scratch[i + 1].0;
            if value == next {
                continue;
            }
            let n_left = (i + 1) as u64;
            let score = Score::split(sq_left, n_left, sq_right, n as u64 - n_left);
            // Strict comparison keeps the earliest (lowest feature, lowest threshold) optimum.
            if best.as_ref().is_none_or(|b| score.beats(&b.3)) {
                best = Some((feature, value, next, score));
            }
        }
    }
    best.map(|(feature, lo, hi, score)| {
        let weighted_impurity = (1.0 - score.value() / n as f64).max(0.0);
        (Split { feature, threshold: midpoint(lo, hi), weighted_impurity }, score)
    })
}

fn class_count(labels: &[usize]) -> usize {
    labels.iter().max().map_or(0, |m| m + 1)
}

/// Best axis-aligned threshold split of `features` (n × d) by weighted Gini impurity.
///
/// Candidate thresholds are midpoints between consecutive distinct sorted values of each
/// feature. Returns `None` only when no feature takes two distinct values. Gini is
/// concave, so the returned split never has higher impurity than the parent; a split
/// with zero decrease is still returned, which lets fitting separate configurations
/// such as XOR where no single split improves purity.
pub fn best_split(features: ArrayView2<'_, f32>, labels: &[usize]) -> Option<Split> {
    if features.nrows() < 2 || features.nrows() != labels.len() {
        return None;
    }
    let columns = features.t().as_standard_layout().into_owned();
    let rows: Vec<usize> = (0..labels.len()).collect();
    search(columns.view(), labels, &rows, class_count(labels), &mut Vec::new()).map(|(s, _)| s)
}

fn majority(counts: &[usize]) -> usize {
    // max_by_key returns the last maximum; iterate in reverse so ties go to the lowest class.
    counts.iter().enumerate().rev().max_by_key(|(_, &c)| c).map(|(i, _)| i).unwrap_or(0)
}

/// Grow an unrestricted tree: a node becomes a leaf when pure or when no feature
/// varies within it. Leaves predict the majority class, ties to the lowest index.
pub fn fit(features: ArrayView2<'_, f32>, labels: &[usize]) -> Result<DecisionTree> {
    let (n, d) = features.dim();
    if labels.len() != n {
        return Err(CartError::DimensionMismatch { rows: n, labels: labels.len() });
    }
    if n == 0 {
        return Err(CartError::EmptyInput);
    }
    if let Some(((row, col), _)) = features.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(CartError::NonFinite { row, col });
    }
    let num_classes = class_count(labels);
    let columns: Array2<f32> = features.t().as_standard_layout().into_owned();
    let mut scratch = Vec::with_capacity(n);

    let mut nodes = vec![Node::Leaf { class_label: 0, sample_count: n }];
    let mut pending = vec![(0usize, (0..n).collect::<Vec<usize>>())];
    while let Some((id, rows)) = pending.pop() {
        let mut counts = vec![0usize; num_classes];
        rows.iter().for_each(|&r| counts[labels[r]] += 1);
        let pure = counts.iter().filter(|&&c| c > 0).count() == 1;
        let split = if pure { None } else { search(columns.view(), labels, &rows, num_classes, &mut scratch) };
        let Some((split, _)) = split else {
            nodes[id] = Node::Leaf { class_label: majority(&counts), sample_count: rows.len() };
            continue;
        };
        let column = columns.row(split.feature);
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&r| column[r] as f64 <= split.threshold);
        let left = nodes.len();
        let right = left + 1;
        nodes.push(Node::Leaf { class_label: 0, sample_count: left_rows.len() });
        nodes.push(Node::Leaf { class_label: 0, sample_count: right_rows.len() });
        nodes[id] =
            Node::Internal { feature: split.feature, threshold: split.threshold, left, right, sample_count: rows.len() };
        pending.push((right, right_rows));
        pending.push((left, left_rows));
    }
    Ok(DecisionTree { nodes, root: 0, num_features: d, num_classes })
}

impl DecisionTree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Route `x` to a leaf: left iff `x[feature] <= threshold`.
    pub fn predict(&self, x: &[f32]) -> usize {
        self.leaf_for(x).0
    }

    /// Leaf label and node index reached by `x`.
    pub fn leaf_for(&self, x: &[f32]) -> (usize, usize) {
        let mut id = self.root;
        loop {
            match self.nodes[id] {
                Node::Leaf { class_label, .. } => return (class_label, id),
                Node::Internal { feature, threshold, left, right, .. } => {
                    id = if x[feature] as f64 <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn internal_count(&self) -> usize {
        self.nodes.len() - self.leaf_count()
    }

    /// Longest root-to-leaf path in edges; a lone root leaf has depth 0.
    pub fn max_depth(&self) -> usize {
        let mut deepest = 0;
        let mut stack = vec![(self.root, 0usize)];
        while let Some((id, depth)) = stack.pop() {
            match self.nodes[id] {
                Node::Leaf { .. } => deepest = deepest.max(depth),
                Node::Internal { left, right, .. } => {
                    stack.push((left, depth + 1));
                    stack.push((right, depth + 1));
                }
            }
        }
        deepest
    }

    pub fn accuracy(&self, features: ArrayView2<'_, f32>, labels: &[usize]) -> f64 {
        if labels.is_empty() {
            return 0.0;
        }
        let hits = features
            .outer_iter()
            .zip(labels)
            .filter(|(row, &label)| match row.as_slice() {
                Some(x) => self.predict(x) == label,
                None => self.predict(&row.to_vec()) == label,
            })
            .count();
        hits as f64 / labels.len() as f64
    }
}

/// Leaf count, maximum depth and training-set accuracy of a fitted tree.
pub fn metrics(tree: &DecisionTree, features: ArrayView2<'_, f32>, labels: &[usize]) -> TreeMetrics {
    TreeMetrics { n_leaf: tree.leaf_count(), d_max: tree.max_depth(), train_accuracy: tree.accuracy(features, labels) }
}
