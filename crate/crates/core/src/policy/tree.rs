//! Depth-bounded regression trees with histogram splits.
//!
//! Split candidates are fixed bin edges computed once from the training
//! data (equal-frequency), so training is deterministic: features are
//! scanned in index order, bins in ascending order, and only strictly
//! better variance reduction replaces the incumbent split.

use serde::{Deserialize, Serialize};

use crate::features::FEATURE_DIM;

/// Minimum variance reduction for a split to be worth keeping.
const MIN_GAIN: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// A regression tree stored as a flat node arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<TreeNode>,
}

impl RegressionTree {
    /// Evaluate on a raw feature row. Total: NaN comparisons go right.
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    idx = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    /// Maximum root-to-leaf depth (a single leaf has depth 0).
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], idx: usize) -> usize {
            match &nodes[idx] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => {
                    1 + walk(nodes, *left).max(walk(nodes, *right))
                }
            }
        }
        walk(&self.nodes, 0)
    }

    /// Structural checks for deserialized trees.
    pub fn validate(&self, max_depth: usize) -> bool {
        if self.nodes.is_empty() {
            return false;
        }
        for node in &self.nodes {
            if let TreeNode::Split {
                feature,
                left,
                right,
                threshold,
            } = node
            {
                if *feature >= FEATURE_DIM
                    || *left >= self.nodes.len()
                    || *right >= self.nodes.len()
                    || !threshold.is_finite()
                {
                    return false;
                }
            }
        }
        self.depth() <= max_depth
    }
}

/// Equal-frequency bin edges per feature, computed once from training data.
#[derive(Debug, Clone)]
pub struct Histogram {
    /// `edges[j]` are the strictly increasing candidate thresholds for
    /// feature `j` (possibly empty for constant features).
    pub edges: Vec<Vec<f64>>,
}

impl Histogram {
    pub fn build(data: &[f64], n_rows: usize, bins: usize) -> Self {
        let mut edges = Vec::with_capacity(FEATURE_DIM);
        for j in 0..FEATURE_DIM {
            let mut values: Vec<f64> = (0..n_rows).map(|i| data[i * FEATURE_DIM + j]).collect();
            values.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut feature_edges = Vec::new();
            for t in 1..bins {
                let idx = t * n_rows / bins;
                if idx == 0 || idx >= n_rows {
                    continue;
                }
                let (lo, hi) = (values[idx - 1], values[idx]);
                if hi > lo {
                    let edge = 0.5 * (lo + hi);
                    // midpoint can round onto `hi`; snap down so `<= edge`
                    // keeps the left quantile on the left
                    let edge = if edge >= hi { lo } else { edge };
                    if feature_edges.last().is_none_or(|&e| edge > e) {
                        feature_edges.push(edge);
                    }
                }
            }
            edges.push(feature_edges);
        }
        Self { edges }
    }

    /// Bin index of a value: the number of edges strictly below it, so
    /// `bin(x) <= t` exactly when `x <= edges[t]`.
    pub fn bin(&self, feature: usize, value: f64) -> usize {
        self.edges[feature].partition_point(|&e| e < value)
    }

    /// Bin every row of a flat feature matrix.
    pub fn bin_all(&self, data: &[f64], n_rows: usize) -> Vec<u8> {
        let mut out = vec![0u8; n_rows * FEATURE_DIM];
        for i in 0..n_rows {
            for j in 0..FEATURE_DIM {
                out[i * FEATURE_DIM + j] = self.bin(j, data[i * FEATURE_DIM + j]) as u8;
            }
        }
        out
    }
}

struct FitContext<'a> {
    binned: &'a [u8],
    targets: &'a [f64],
    edges: &'a [Vec<f64>],
    max_depth: usize,
    min_leaf: usize,
    nodes: Vec<TreeNode>,
}

/// Fit a regression tree to `targets` over the given row indices.
pub fn fit_tree(
    binned: &[u8],
    targets: &[f64],
    indices: &[usize],
    histogram: &Histogram,
    max_depth: usize,
    min_leaf: usize,
) -> RegressionTree {
    let mut ctx = FitContext {
        binned,
        targets,
        edges: &histogram.edges,
        max_depth,
        min_leaf,
        nodes: Vec::new(),
    };
    let mut scratch = indices.to_vec();
    build_node(&mut ctx, &mut scratch, 0);
    RegressionTree { nodes: ctx.nodes }
}

fn build_node(ctx: &mut FitContext, indices: &mut [usize], depth: usize) -> usize {
    let n = indices.len();
    let sum: f64 = indices.iter().map(|&i| ctx.targets[i]).sum();
    let mean = sum / n as f64;

    if depth >= ctx.max_depth || n < 2 * ctx.min_leaf {
        return push_leaf(ctx, mean);
    }

    let Some((feature, bin_cut, threshold)) = best_split(ctx, indices) else {
        return push_leaf(ctx, mean);
    };

    // partition in place, preserving relative order on each side
    let mut left: Vec<usize> = Vec::with_capacity(n);
    let mut right: Vec<usize> = Vec::with_capacity(n);
    for &i in indices.iter() {
        if ctx.binned[i * FEATURE_DIM + feature] as usize <= bin_cut {
            left.push(i);
        } else {
            right.push(i);
        }
    }
    debug_assert!(left.len() >= ctx.min_leaf && right.len() >= ctx.min_leaf);

    let node_idx = ctx.nodes.len();
    ctx.nodes.push(TreeNode::Leaf { value: mean }); // placeholder
    let left_idx = build_node(ctx, &mut left, depth + 1);
    let right_idx = build_node(ctx, &mut right, depth + 1);
    ctx.nodes[node_idx] = TreeNode::Split {
        feature,
        threshold,
        left: left_idx,
        right: right_idx,
    };
    node_idx
}

fn push_leaf(ctx: &mut FitContext, value: f64) -> usize {
    ctx.nodes.push(TreeNode::Leaf { value });
    ctx.nodes.len() - 1
}

/// Best (feature, bin cut) by variance reduction, or None when nothing
/// clears `MIN_GAIN` with both sides at least `min_leaf` rows.
fn best_split(ctx: &FitContext, indices: &[usize]) -> Option<(usize, usize, f64)> {
    let n = indices.len();
    let total_sum: f64 = indices.iter().map(|&i| ctx.targets[i]).sum();

    let mut best: Option<(usize, usize, f64)> = None;
    let mut best_gain = MIN_GAIN;

    let mut counts = [0usize; 64];
    let mut sums = [0.0f64; 64];
    for (feature, edges) in ctx.edges.iter().enumerate() {
        if edges.is_empty() {
            continue;
        }
        let n_bins = edges.len() + 1;
        counts[..n_bins].fill(0);
        sums[..n_bins].fill(0.0);
        for &i in indices {
            let b = ctx.binned[i * FEATURE_DIM + feature] as usize;
            counts[b] += 1;
            sums[b] += ctx.targets[i];
        }
        let mut left_count = 0usize;
        let mut left_sum = 0.0f64;
        for cut in 0..n_bins - 1 {
            left_count += counts[cut];
            left_sum += sums[cut];
            let right_count = n - left_count;
            if left_count < ctx.min_leaf || right_count < ctx.min_leaf {
                continue;
            }
            let right_sum = total_sum - left_sum;
            // variance reduction: the sum-of-squares terms of
            // parent - (left + right) cancel, leaving the between-group part
            let explained = left_sum * left_sum / left_count as f64
                + right_sum * right_sum / right_count as f64
                - total_sum * total_sum / n as f64;
            if explained > best_gain {
                best_gain = explained;
                best = Some((feature, cut, edges[cut]));
            }
        }
    }
    best
}
