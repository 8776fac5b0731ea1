use rayon::prelude::*;

use super::bins::{BinMapping, BinnedFeatures};
use crate::error::{invalid_input, invalid_param, Result};

/// Split gains at or below this fraction of the node's `Σ r²` are treated as
/// rounding noise rather than improvement.
const GAIN_NOISE_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    /// Rows with `x[feature] <= threshold` go to `left`.
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf { value: f64 },
}

/// Binary regression tree stored as a node arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTree {
    pub nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn constant(value: f64) -> Self {
        Self { nodes: vec![Node::Leaf { value }] }
    }

    pub fn num_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    /// Features beyond the end of `row` read as 0.
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut idx = 0;
        loop {
            match self.nodes[idx] {
                Node::Leaf { value } => return value,
                Node::Split { feature, threshold, left, right } => {
                    let x = row.get(feature).copied().unwrap_or(0.0);
                    idx = if x <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn max_feature(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .max()
    }

    /// Checks the arena is a proper binary tree rooted at node 0.
    pub fn validate(&self) -> Result<()> {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            if i >= self.nodes.len() || seen[i] {
                return Err(invalid_input(format!("node {i} is missing or reached twice")));
            }
            seen[i] = true;
            match self.nodes[i] {
                Node::Split { threshold, left, right, .. } => {
                    if !threshold.is_finite() {
                        return Err(invalid_input(format!("node {i} has a non-finite threshold")));
                    }
                    stack.push(left);
                    stack.push(right);
                }
                Node::Leaf { value } => {
                    if !value.is_finite() {
                        return Err(invalid_input(format!("leaf {i} has a non-finite value")));
                    }
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(invalid_input("tree has unreachable nodes"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    pub num_leaves: usize,
    pub min_samples_per_leaf: usize,
}

impl TreeParams {
    pub fn validate(&self) -> Result<()> {
        if self.num_leaves < 2 {
            return Err(invalid_param(format!("num_leaves must be >= 2, got {}", self.num_leaves)));
        }
        if self.min_samples_per_leaf < 1 {
            return Err(invalid_param("min_samples_per_leaf must be >= 1"));
        }
        Ok(())
    }
}

/// A fitted tree plus its output on every training row.
#[derive(Debug, Clone)]
pub struct FittedTree {
    pub tree: RegressionTree,
    pub row_outputs: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    bin: usize,
}

struct OpenLeaf {
    node: usize,
    rows: Vec<u32>,
    best: Option<Candidate>,
}

fn best_split(
    binned: &BinnedFeatures,
    mapping: &BinMapping,
    residuals: &[f64],
    rows: &[u32],
    min_leaf: usize,
) -> Option<Candidate> {
    let n = rows.len();
    if n < 2 * min_leaf {
        return None;
    }
    let total: f64 = rows.iter().map(|&r| residuals[r as usize]).sum();
    let sum_sq: f64 = rows.iter().map(|&r| residuals[r as usize].powi(2)).sum();
    let parent = total * total / n as f64;
    let floor = GAIN_NOISE_FLOOR * sum_sq;

    let per_feature: Vec<Option<Candidate>> = (0..mapping.num_features())
        .into_par_iter()
        .map(|feature| {
            let num_bins = mapping.num_bins(feature);
            if num_bins < 2 {
                return None;
            }
            let column = &binned.bins[feature];
            let mut sums = vec![0.0f64; num_bins];
            let mut counts = vec![0usize; num_bins];
            for &r in rows {
                let b = column[r as usize] as usize;
                sums[b] += residuals[r as usize];
                counts[b] += 1;
            }
            let mut best: Option<Candidate> = None;
            let (mut left_sum, mut left_n) = (0.0, 0usize);
            for bin in 0..num_bins - 1 {
                left_sum += sums[bin];
                left_n += counts[bin];
                let right_n = n - left_n;
                if left_n < min_leaf || right_n < min_leaf {
                    continue;
                }
                let right_sum = total - left_sum;
                let gain = left_sum * left_sum / left_n as f64 + right_sum * right_sum / right_n as f64
                    - parent;
                if gain > floor && best.is_none_or(|b| gain > b.gain) {
                    best = Some(Candidate { gain, feature, bin });
                }
            }
            best
        })
        .collect();

    per_feature
        .into_iter()
        .flatten()
        .fold(None, |acc: Option<Candidate>, c| match acc {
            Some(a) if a.gain >= c.gain => Some(a),
            _ => Some(c),
        })
}

fn mean_of(residuals: &[f64], rows: &[u32]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    rows.iter().map(|&r| residuals[r as usize]).sum::<f64>() / rows.len() as f64
}

/// Fits a squared-error regression tree to `residuals`, growing leaf-wise:
/// the open leaf with the largest split gain is split until `num_leaves`
/// leaves exist or no leaf has a positive-gain split. Split gain is
/// `G_L²/n_L + G_R²/n_R − G²/n`; leaf values are mean residuals. Ties go to
/// the lower feature index, then the lower threshold, then the older leaf.
pub fn fit_tree(
    binned: &BinnedFeatures,
    mapping: &BinMapping,
    residuals: &[f64],
    params: &TreeParams,
) -> Result<FittedTree> {
    params.validate()?;
    if residuals.len() != binned.rows {
        return Err(invalid_input(format!(
            "{} residuals for {} rows",
            residuals.len(),
            binned.rows
        )));
    }
    if binned.bins.len() != mapping.num_features() {
        return Err(invalid_input("binned features do not match the bin mapping"));
    }
    let min_leaf = params.min_samples_per_leaf;

    let mut nodes = vec![Node::Leaf { value: 0.0 }];
    let root_rows: Vec<u32> = (0..binned.rows as u32).collect();
    let best = best_split(binned, mapping, residuals, &root_rows, min_leaf);
    let mut open = vec![OpenLeaf { node: 0, rows: root_rows, best }];
    let mut num_leaves = 1;

    while num_leaves < params.num_leaves {
        let pick = open
            .iter()
            .enumerate()
            .filter_map(|(i, leaf)| leaf.best.map(|c| (i, leaf.node, c.gain)))
            .fold(None, |acc: Option<(usize, usize, f64)>, cur| match acc {
                Some(a) if a.2 > cur.2 || (a.2 == cur.2 && a.1 < cur.1) => Some(a),
                _ => Some(cur),
            });
        let Some((slot, _, _)) = pick else { break };
        let leaf = open.swap_remove(slot);
        let split = leaf.best.expect("picked leaf has a split");
        let column = &binned.bins[split.feature];
        let (left_rows, right_rows): (Vec<u32>, Vec<u32>) =
            leaf.rows.iter().partition(|&&r| column[r as usize] as usize <= split.bin);

        let left = nodes.len();
        let right = left + 1;
        nodes.push(Node::Leaf { value: 0.0 });
        nodes.push(Node::Leaf { value: 0.0 });
        nodes[leaf.node] = Node::Split {
            feature: split.feature,
            threshold: mapping.thresholds[split.feature][split.bin],
            left,
            right,
        };
        num_leaves += 1;
        for (node, rows) in [(left, left_rows), (right, right_rows)] {
            let best = best_split(binned, mapping, residuals, &rows, min_leaf);
            open.push(OpenLeaf { node, rows, best });
        }
    }

    let mut row_outputs = vec![0.0; binned.rows];
    for leaf in &open {
        let value = mean_of(residuals, &leaf.rows);
        nodes[leaf.node] = Node::Leaf { value };
        for &r in &leaf.rows {
            row_outputs[r as usize] = value;
        }
    }
    Ok(FittedTree { tree: RegressionTree { nodes }, row_outputs })
}
