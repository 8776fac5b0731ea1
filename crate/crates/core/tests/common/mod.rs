//! Independent reference implementations shared by the integration tests.
//!
//! None of these reuse the library's sort / PAV / histogram code paths.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use softrank_gbm::gbm::Node;
use softrank_gbm::FeatureMatrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn descending_rho(n: usize) -> Vec<f64> {
    (0..n).map(|i| (n - i) as f64).collect()
}

// ---------------------------------------------------------------------------
// Permutahedron projection by face enumeration.
//
// Every face of the permutahedron of a strictly decreasing ρ corresponds to an
// ordered set partition (B_1, …, B_m) of the coordinates: block B_j takes the
// next |B_j| largest entries of ρ, and the face is the set of points where each
// prefix union B_1 ∪ … ∪ B_j sums to the matching prefix sum of ρ. Projecting
// z onto a face's affine hull gives y_i = z_i − mean_{B_j}(z) + mean(ρ slice j).
// The projection onto the polytope is the unique such point that is primal
// feasible (every subset sum bounded by the top-|S| sum of ρ) and dual feasible
// (the block shifts w_j = mean_{B_j}(z) − mean(ρ slice j) are nonincreasing,
// i.e. the multipliers of the tight prefix constraints are nonnegative).
// ---------------------------------------------------------------------------

/// All ordered set partitions of `0..n`, as a block label per element.
pub fn ordered_partitions(n: usize) -> Vec<(usize, Vec<usize>)> {
    fn rec(i: usize, n: usize, m: usize, labels: &mut Vec<usize>, out: &mut Vec<(usize, Vec<usize>)>) {
        if i == n {
            let mut used = vec![false; m];
            for &l in labels.iter() {
                used[l] = true;
            }
            if used.iter().all(|&u| u) {
                out.push((m, labels.clone()));
            }
            return;
        }
        for l in 0..m {
            labels.push(l);
            rec(i + 1, n, m, labels, out);
            labels.pop();
        }
    }
    let mut out = Vec::new();
    for m in 1..=n {
        rec(0, n, m, &mut Vec::new(), &mut out);
    }
    out
}

fn in_permutahedron(y: &[f64], rho: &[f64], tol: f64) -> bool {
    let n = y.len();
    let mut top = rho.to_vec();
    top.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let prefix: Vec<f64> = top
        .iter()
        .scan(0.0, |acc, v| {
            *acc += v;
            Some(*acc)
        })
        .collect();
    if (y.iter().sum::<f64>() - prefix[n - 1]).abs() > tol {
        return false;
    }
    for mask in 1u32..(1 << n) - 1 {
        let mut sum = 0.0;
        let mut size = 0;
        for (i, &v) in y.iter().enumerate() {
            if mask & (1 << i) != 0 {
                sum += v;
                size += 1;
            }
        }
        if sum > prefix[size - 1] + tol {
            return false;
        }
    }
    true
}

/// Projection of `z` onto the permutahedron of strictly decreasing `rho`.
pub struct FaceOracle {
    partitions: Vec<Vec<(usize, Vec<usize>)>>,
}

impl FaceOracle {
    pub fn new(max_n: usize) -> Self {
        Self { partitions: (0..=max_n).map(ordered_partitions).collect() }
    }

    pub fn project(&self, z: &[f64], rho: &[f64]) -> Vec<f64> {
        let n = z.len();
        let scale = 1.0 + z.iter().chain(rho).map(|v| v.abs()).fold(0.0, f64::max);
        let tol = 1e-10 * scale * n as f64;
        let mut best: Option<(f64, Vec<f64>)> = None;
        for (m, labels) in &self.partitions[n] {
            let m = *m;
            let mut size = vec![0usize; m];
            let mut zsum = vec![0.0; m];
            for (i, &l) in labels.iter().enumerate() {
                size[l] += 1;
                zsum[l] += z[i];
            }
            let mut offset = 0;
            let mut shift = vec![0.0; m];
            for j in 0..m {
                let rho_mean = rho[offset..offset + size[j]].iter().sum::<f64>() / size[j] as f64;
                offset += size[j];
                shift[j] = zsum[j] / size[j] as f64 - rho_mean;
            }
            if shift.windows(2).any(|w| w[0] < w[1] - tol) {
                continue;
            }
            let y: Vec<f64> = labels.iter().enumerate().map(|(i, &l)| z[i] - shift[l]).collect();
            if !in_permutahedron(&y, rho, tol) {
                continue;
            }
            let dist: f64 = y.iter().zip(z).map(|(a, b)| (a - b).powi(2)).sum();
            if best.as_ref().is_none_or(|(d, _)| dist < *d) {
                best = Some((dist, y));
            }
        }
        best.expect("some face always contains the projection").1
    }

    /// Soft rank by the face oracle: projection of −θ/ε onto ψ((n, …, 1)).
    pub fn soft_rank(&self, theta: &[f64], epsilon: f64) -> Vec<f64> {
        let z: Vec<f64> = theta.iter().map(|t| -t / epsilon).collect();
        self.project(&z, &descending_rho(theta.len()))
    }
}

// ---------------------------------------------------------------------------
// Finite differences.
// ---------------------------------------------------------------------------

/// Central-difference Jacobian of `f` at `x`, column `j` = ∂f/∂x_j.
pub fn fd_jacobian(f: impl Fn(&[f64]) -> Vec<f64>, x: &[f64], h: f64) -> Vec<Vec<f64>> {
    (0..x.len())
        .map(|j| {
            let mut plus = x.to_vec();
            let mut minus = x.to_vec();
            plus[j] += h;
            minus[j] -= h;
            let (fp, fm) = (f(&plus), f(&minus));
            fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect()
        })
        .collect()
}

/// Central-difference gradient of a scalar function.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|j| {
            let mut plus = x.to_vec();
            let mut minus = x.to_vec();
            plus[j] += h;
            minus[j] -= h;
            (f(&plus) - f(&minus)) / (2.0 * h)
        })
        .collect()
}

/// `‖a − b‖ / max(‖b‖, floor)`.
pub fn relative_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let norm: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    diff / norm.max(floor)
}

/// True when the scaled, sorted scores keep every chain-constraint decision
/// at least `margin` away from a tie. `−θ/ε` sorted descending minus ρ
/// must have consecutive gaps of at least `margin` away from 0, so
/// perturbations of size h cannot change which elements pool.
pub fn away_from_pav_boundaries(theta: &[f64], epsilon: f64, margin: f64) -> bool {
    let mut z: Vec<f64> = theta.iter().map(|t| -t / epsilon).collect();
    z.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let n = z.len();
    let u: Vec<f64> = z.iter().enumerate().map(|(i, v)| v - (n - i) as f64).collect();
    // Pool-membership changes when a block-mean comparison flips. Checking
    // every contiguous-segment mean against its neighbours is exhaustive.
    for a in 0..n {
        for b in a + 1..=n {
            for c in b + 1..=n {
                let left = u[a..b].iter().sum::<f64>() / (b - a) as f64;
                let right = u[b..c].iter().sum::<f64>() / (c - b) as f64;
                if (left - right).abs() < margin {
                    return false;
                }
            }
        }
    }
    // Distinct sorted values, so the sort order itself is stable under h.
    z.windows(2).all(|w| (w[0] - w[1]).abs() >= margin)
}

// ---------------------------------------------------------------------------
// Metrics from first principles: position of each document is counted
// directly (documents scoring higher, or equal with a lower index).
// ---------------------------------------------------------------------------

fn positions(scores: &[f64]) -> Vec<usize> {
    (0..scores.len())
        .map(|i| {
            1 + (0..scores.len())
                .filter(|&j| scores[j] > scores[i] || (scores[j] == scores[i] && j < i))
                .count()
        })
        .collect()
}

/// Sums per-position terms in position order, so results are comparable
/// bit for bit with a scorer that walks a sorted list.
fn sum_by_position(pos: &[usize], k: usize, term: impl Fn(usize, usize) -> f64) -> f64 {
    let mut at = vec![None; pos.len() + 1];
    for (i, &p) in pos.iter().enumerate() {
        at[p] = Some(i);
    }
    (1..=k.min(pos.len())).map(|p| term(at[p].unwrap(), p)).sum()
}

pub fn brute_ndcg(labels: &[f64], scores: &[f64], k: usize) -> f64 {
    let term = |l: f64, p: usize| (l.exp2() - 1.0) / ((p + 1) as f64).log2();
    let dcg = sum_by_position(&positions(scores), k, |i, p| term(labels[i], p));
    // ideal: documents placed by label; order among equal labels leaves
    // every term unchanged
    let idcg = sum_by_position(&positions(labels), k, |i, p| term(labels[i], p));
    if idcg <= 0.0 {
        0.0
    } else {
        dcg / idcg
    }
}

pub fn brute_map(labels: &[f64], scores: &[f64], k: usize) -> f64 {
    let rel: Vec<bool> = labels.iter().map(|&l| l >= 1.0).collect();
    let total = rel.iter().filter(|&&r| r).count();
    if total == 0 {
        return 0.0;
    }
    let pos = positions(scores);
    let sum = sum_by_position(&pos, k, |i, p| {
        if !rel[i] {
            return 0.0;
        }
        let above = (0..labels.len()).filter(|&j| rel[j] && pos[j] <= p).count();
        above as f64 / p as f64
    });
    sum / total.min(k) as f64
}

// ---------------------------------------------------------------------------
// Exact-greedy regression trees and GBRT on raw feature values.
// ---------------------------------------------------------------------------

fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo + (hi - lo) / 2.0;
    if m >= hi {
        lo
    } else {
        m
    }
}

pub fn candidate_thresholds(x: &FeatureMatrix) -> Vec<Vec<f64>> {
    (0..x.cols())
        .map(|f| {
            let mut v: Vec<f64> = x.column(f).collect();
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            v.dedup();
            v.windows(2).map(|w| midpoint(w[0], w[1])).collect()
        })
        .collect()
}

struct RefLeaf {
    node: usize,
    rows: Vec<usize>,
    best: Option<(f64, usize, f64)>,
}

fn ref_best(
    x: &FeatureMatrix,
    r: &[f64],
    rows: &[usize],
    thresholds: &[Vec<f64>],
    min_leaf: usize,
) -> Option<(f64, usize, f64)> {
    let n = rows.len();
    let total: f64 = rows.iter().map(|&i| r[i]).sum();
    let sum_sq: f64 = rows.iter().map(|&i| r[i] * r[i]).sum();
    let parent = total * total / n as f64;
    let mut best: Option<(f64, usize, f64)> = None;
    for (f, ts) in thresholds.iter().enumerate() {
        for &t in ts {
            let left: Vec<usize> = rows.iter().copied().filter(|&i| x.get(i, f) <= t).collect();
            let right: Vec<usize> = rows.iter().copied().filter(|&i| x.get(i, f) > t).collect();
            if left.len() < min_leaf || right.len() < min_leaf {
                continue;
            }
            let gl: f64 = left.iter().map(|&i| r[i]).sum();
            let gr: f64 = right.iter().map(|&i| r[i]).sum();
            let gain = gl * gl / left.len() as f64 + gr * gr / right.len() as f64 - parent;
            if gain > 1e-10 * sum_sq && best.is_none_or(|b| gain > b.0) {
                best = Some((gain, f, t));
            }
        }
    }
    best
}

/// Leaf-wise exact-greedy tree with the same growth and tie rules as the
/// library. Returns the node arena and each row's output.
pub fn reference_tree(
    x: &FeatureMatrix,
    r: &[f64],
    num_leaves: usize,
    min_leaf: usize,
    thresholds: &[Vec<f64>],
) -> (Vec<Node>, Vec<f64>) {
    let mut nodes = vec![Node::Leaf { value: 0.0 }];
    let all: Vec<usize> = (0..x.rows()).collect();
    let best = ref_best(x, r, &all, thresholds, min_leaf);
    let mut open = vec![RefLeaf { node: 0, rows: all, best }];
    while open.len() < num_leaves {
        let mut pick: Option<usize> = None;
        for (i, leaf) in open.iter().enumerate() {
            let Some((gain, _, _)) = leaf.best else { continue };
            match pick {
                None => pick = Some(i),
                Some(p) => {
                    let (pg, _, _) = open[p].best.unwrap();
                    if gain > pg || (gain == pg && leaf.node < open[p].node) {
                        pick = Some(i);
                    }
                }
            }
        }
        let Some(p) = pick else { break };
        let leaf = open.remove(p);
        let (_, f, t) = leaf.best.unwrap();
        let left_rows: Vec<usize> = leaf.rows.iter().copied().filter(|&i| x.get(i, f) <= t).collect();
        let right_rows: Vec<usize> = leaf.rows.iter().copied().filter(|&i| x.get(i, f) > t).collect();
        let (left, right) = (nodes.len(), nodes.len() + 1);
        nodes.push(Node::Leaf { value: 0.0 });
        nodes.push(Node::Leaf { value: 0.0 });
        nodes[leaf.node] = Node::Split { feature: f, threshold: t, left, right };
        for (node, rows) in [(left, left_rows), (right, right_rows)] {
            let best = ref_best(x, r, &rows, thresholds, min_leaf);
            open.push(RefLeaf { node, rows, best });
        }
    }
    let mut out = vec![0.0; x.rows()];
    for leaf in &open {
        let value = if leaf.rows.is_empty() {
            0.0
        } else {
            leaf.rows.iter().map(|&i| r[i]).sum::<f64>() / leaf.rows.len() as f64
        };
        nodes[leaf.node] = Node::Leaf { value };
        for &i in &leaf.rows {
            out[i] = value;
        }
    }
    (nodes, out)
}

/// Plain squared-error GBRT from f_0 = 0 with exact-greedy trees.
pub fn reference_gbrt(
    x: &FeatureMatrix,
    y: &[f64],
    iterations: usize,
    learning_rate: f64,
    num_leaves: usize,
    min_leaf: usize,
) -> Vec<Vec<Node>> {
    let thresholds = candidate_thresholds(x);
    let mut f = vec![0.0; y.len()];
    let mut trees = Vec::new();
    for _ in 0..iterations {
        let r: Vec<f64> = y.iter().zip(&f).map(|(y, f)| y - f).collect();
        let (nodes, out) = reference_tree(x, &r, num_leaves, min_leaf, &thresholds);
        for (fi, o) in f.iter_mut().zip(&out) {
            *fi += learning_rate * o;
        }
        trees.push(nodes);
    }
    trees
}

// ---------------------------------------------------------------------------
// Random instances.
// ---------------------------------------------------------------------------

pub fn normal(rng: &mut impl Rng) -> f64 {
    rng.sample(rand_distr::StandardNormal)
}

pub fn random_vector(rng: &mut impl Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * normal(rng)).collect()
}

/// Regression data with a smooth nonlinear target.
pub fn regression_set(rng: &mut impl Rng, rows: usize, cols: usize) -> (FeatureMatrix, Vec<f64>) {
    let mut data = Vec::with_capacity(rows * cols);
    let mut y = Vec::with_capacity(rows);
    for _ in 0..rows {
        let row: Vec<f64> = (0..cols).map(|_| rng.random_range(-2.0..2.0)).collect();
        y.push(row[0].sin() + 0.5 * row.get(1).copied().unwrap_or(0.0).powi(2) + 0.1 * normal(rng));
        data.extend(row);
    }
    (FeatureMatrix::new(rows, cols, data).unwrap(), y)
}
