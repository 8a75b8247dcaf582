//! Second-order gradient boosted regression trees with logistic loss.
//!
//! Produces the relatedness score of a (question, article) pair and
//! gain-based feature importance.

mod io;
mod train;

#[cfg(test)]
mod tests;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use train::{best_split, train_gbdt, train_gbdt_logged, SplitCandidate};

use crate::error::{Error, Result};

/// Marker for a feature value with no representation. Routed at each split
/// through the node's learned default branch.
pub const MISSING: f64 = f64::INFINITY;

pub(crate) fn is_missing(v: f64) -> bool {
    !v.is_finite()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtParams {
    pub num_rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_child_weight: f64,
    /// L2 penalty on leaf weights.
    pub lambda: f64,
    /// Minimum gain required to keep a split.
    pub gamma: f64,
    /// Row sampling fraction per round, in (0, 1].
    pub subsample: f64,
    pub seed: u64,
    /// Initial probability; the positive-label rate when `None`.
    pub base_score: Option<f64>,
}

impl Default for GbdtParams {
    fn default() -> Self {
        GbdtParams {
            num_rounds: 200,
            max_depth: 4,
            learning_rate: 0.1,
            min_child_weight: 1.0,
            lambda: 1.0,
            gamma: 0.0,
            subsample: 0.8,
            seed: 42,
            base_score: None,
        }
    }
}

impl GbdtParams {
    // negated comparisons so that NaN fails every check
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::invalid(format!("gbdt params: {m}")));
        if self.max_depth == 0 {
            return bad("max_depth must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.lambda >= 0.0) || !(self.gamma >= 0.0) || !(self.min_child_weight >= 0.0) {
            return bad("lambda, gamma and min_child_weight must be non-negative");
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return bad("subsample must lie in (0, 1]");
        }
        if let Some(b) = self.base_score {
            if !(b > 0.0 && b < 1.0) {
                return bad("base_score must lie in (0, 1)");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TreeNode {
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
        default_left: bool,
        gain: f64,
    },
    Leaf {
        weight: f64,
    },
}

/// Nodes in creation order; node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTree {
    pub nodes: Vec<TreeNode>,
}

impl RegressionTree {
    /// Raw leaf weight for `row`; values `< threshold` go left.
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut i = 0usize;
        loop {
            match self.nodes[i] {
                TreeNode::Leaf { weight } => return weight,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    default_left,
                    ..
                } => {
                    let v = row[feature as usize];
                    let go_left = if is_missing(v) { default_left } else { v < threshold };
                    i = if go_left { left } else { right } as usize;
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(t: &RegressionTree, i: usize) -> usize {
            match t.nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + walk(t, left as usize).max(walk(t, right as usize)),
            }
        }
        walk(self, 0)
    }

    pub fn split_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Split { .. }))
            .count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GbdtModel {
    pub trees: Vec<RegressionTree>,
    pub learning_rate: f64,
    pub base_margin: f64,
    pub feature_count: usize,
}

impl GbdtModel {
    /// A model with no trees.
    pub fn constant(base_margin: f64, feature_count: usize, learning_rate: f64) -> Self {
        GbdtModel {
            trees: Vec::new(),
            learning_rate,
            base_margin,
            feature_count,
        }
    }

    pub fn margin(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.feature_count {
            return Err(Error::Dimension {
                expected: self.feature_count,
                actual: row.len(),
            });
        }
        let sum: f64 = self.trees.iter().map(|t| t.predict(row)).sum();
        Ok(self.base_margin + self.learning_rate * sum)
    }

    /// Relatedness probability `sigmoid(base + η Σ tree(row))`.
    pub fn predict_rel(&self, row: &[f64]) -> Result<f64> {
        self.margin(row).map(sigmoid)
    }

    /// Share of total split gain per feature index. Features never split on
    /// are absent; the map is empty for a model without splits.
    pub fn feature_importance(&self) -> BTreeMap<usize, f64> {
        let mut gains: BTreeMap<usize, f64> = BTreeMap::new();
        for tree in &self.trees {
            for node in &tree.nodes {
                if let TreeNode::Split { feature, gain, .. } = *node {
                    *gains.entry(feature as usize).or_default() += gain;
                }
            }
        }
        let total: f64 = gains.values().sum();
        if total <= 0.0 {
            return BTreeMap::new();
        }
        gains.values_mut().for_each(|g| *g /= total);
        gains
    }

    /// Importance shares summed per group label.
    pub fn grouped_importance<K: Ord + Copy>(&self, groups: &[K]) -> BTreeMap<K, f64> {
        let mut out = BTreeMap::new();
        for (f, share) in self.feature_importance() {
            if let Some(&k) = groups.get(f) {
                *out.entry(k).or_default() += share;
            }
        }
        out
    }
}

/// Row-major feature table.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl FeatureTable {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::Dimension {
                expected: rows * cols,
                actual: values.len(),
            });
        }
        Ok(FeatureTable { rows, cols, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::Dimension {
                    expected: cols,
                    actual: r.len(),
                });
            }
            values.extend_from_slice(r);
        }
        Ok(FeatureTable {
            rows: rows.len(),
            cols,
            values,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols + c]
    }
}

pub use io::{decode_model, encode_model, SECTION_TAG};
