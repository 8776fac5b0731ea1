//! Differentiable ranking via projection onto the permutahedron.
//!
//! The soft rank of a score vector `θ` with regularisation strength `ε` is the
//! Euclidean projection of `−θ/ε` onto the permutahedron of `ρ = (n, n−1, …, 1)`.
//! The projection reduces to a sort followed by an isotonic regression under
//! chain constraints, which pool-adjacent-violators (PAV) solves in linear
//! time. The PAV block partition also gives the Jacobian in closed form:
//!
//! ```text
//! J = −(1/ε) (I − Pᵀ B P)
//! ```
//!
//! where `P` is the sort permutation and `B` averages within each block.
//!
//! Ranks are descending: the largest score receives the soft rank closest to 1.

use std::cmp::Ordering;
use std::ops::Range;

use crate::error::{invalid_input, invalid_param, Result};

/// Solution of a nonincreasing isotonic regression, as contiguous pools.
#[derive(Debug, Clone, PartialEq)]
pub struct PavBlocks {
    /// `boundaries[b]..boundaries[b + 1]` is block `b`; first is 0, last is n.
    pub boundaries: Vec<usize>,
    /// Mean of the input over each block. Strictly decreasing.
    pub means: Vec<f64>,
}

impl PavBlocks {
    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    pub fn ranges(&self) -> impl Iterator<Item = Range<usize>> + '_ {
        self.boundaries.windows(2).map(|w| w[0]..w[1])
    }

    /// Expands the block means back to one value per position.
    pub fn expand(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.boundaries.last().copied().unwrap_or(0));
        for (range, &mean) in self.ranges().zip(&self.means) {
            out.extend(std::iter::repeat_n(mean, range.len()));
        }
        out
    }
}

/// Output of [`soft_rank`], carrying what the backward pass needs.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftRankResult {
    pub soft_ranks: Vec<f64>,
    /// `sort_perm[k]` is the original index at sorted position `k`
    /// (sorting `−θ/ε` descending, ties by original index).
    pub sort_perm: Vec<usize>,
    /// PAV pools as ranges over sorted positions.
    pub blocks: Vec<Range<usize>>,
    pub epsilon: f64,
}

impl SoftRankResult {
    pub fn len(&self) -> usize {
        self.soft_ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.soft_ranks.is_empty()
    }
}

fn check_finite(values: &[f64], what: &str) -> Result<()> {
    if values.is_empty() {
        return Err(invalid_input(format!("{what} must be nonempty")));
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(invalid_input(format!(
            "{what} has non-finite entry {} at index {i}",
            values[i]
        )));
    }
    Ok(())
}

/// Isotonic regression onto nonincreasing sequences.
///
/// Returns `v = argmin Σ (v_i − u_i)²` subject to `v_1 ≥ v_2 ≥ … ≥ v_n`, and
/// the pooled blocks. Adjacent blocks are merged whenever the earlier mean is
/// not strictly larger than the later one, so the returned means strictly
/// decrease.
pub fn isotonic_pav(u: &[f64]) -> Result<(Vec<f64>, PavBlocks)> {
    check_finite(u, "isotonic input")?;
    let blocks = pav_blocks(u);
    Ok((blocks.expand(), blocks))
}

// Stack of (start, sum, count); each new element is pushed and merged
// backwards while it violates the ordering with its predecessor.
fn pav_blocks(u: &[f64]) -> PavBlocks {
    let mut starts: Vec<usize> = Vec::with_capacity(u.len());
    let mut sums: Vec<f64> = Vec::with_capacity(u.len());
    let mut counts: Vec<usize> = Vec::with_capacity(u.len());

    for (i, &value) in u.iter().enumerate() {
        starts.push(i);
        sums.push(value);
        counts.push(1);
        while sums.len() > 1 {
            let last = sums.len() - 1;
            let prev_mean = sums[last - 1] / counts[last - 1] as f64;
            let mean = sums[last] / counts[last] as f64;
            if prev_mean > mean {
                break;
            }
            let (s, c) = (sums.pop().unwrap(), counts.pop().unwrap());
            starts.pop();
            sums[last - 1] += s;
            counts[last - 1] += c;
        }
    }

    let means = sums.iter().zip(&counts).map(|(&s, &c)| s / c as f64).collect();
    let mut boundaries = starts;
    boundaries.push(u.len());
    PavBlocks { boundaries, means }
}

/// Permutation sorting `z` in descending order, ties kept in index order.
fn descending_order(z: &[f64]) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..z.len()).collect();
    // Stable sort; inputs are finite so partial_cmp never fails.
    perm.sort_by(|&a, &b| z[b].partial_cmp(&z[a]).unwrap_or(Ordering::Equal));
    perm
}

/// Euclidean projection of `z` onto the permutahedron of `rho`.
///
/// `rho` must be strictly decreasing. Returns the projection together with
/// the sort permutation and the PAV blocks (over sorted positions).
pub fn permutahedron_project(z: &[f64], rho: &[f64]) -> Result<(Vec<f64>, Vec<usize>, PavBlocks)> {
    check_finite(z, "projection input")?;
    check_finite(rho, "rho")?;
    if z.len() != rho.len() {
        return Err(invalid_input(format!(
            "length mismatch: z has {} entries, rho has {}",
            z.len(),
            rho.len()
        )));
    }
    if rho.windows(2).any(|w| w[0] <= w[1]) {
        return Err(invalid_input("rho must be strictly decreasing"));
    }
    Ok(project_unchecked(z, rho))
}

fn project_unchecked(z: &[f64], rho: &[f64]) -> (Vec<f64>, Vec<usize>, PavBlocks) {
    let perm = descending_order(z);
    let sorted: Vec<f64> = perm.iter().map(|&i| z[i]).collect();
    let diff: Vec<f64> = sorted.iter().zip(rho).map(|(s, r)| s - r).collect();
    let blocks = pav_blocks(&diff);

    // Within a block y = s − mean(s − ρ), evaluated as mean(ρ) + (s − mean(s)).
    // The two agree mathematically; this form returns ρ exactly on singletons.
    let mut y = vec![0.0; z.len()];
    for range in blocks.ranges() {
        let len = range.len() as f64;
        let mean_s = sorted[range.clone()].iter().sum::<f64>() / len;
        let mean_rho = rho[range.clone()].iter().sum::<f64>() / len;
        for k in range {
            y[perm[k]] = mean_rho + (sorted[k] - mean_s);
        }
    }
    (y, perm, blocks)
}

/// Soft ranks of `theta` with regularisation `epsilon > 0`.
///
/// Small `epsilon` approaches the hard descending ranks, large `epsilon`
/// flattens every rank towards `(n + 1) / 2`.
pub fn soft_rank(theta: &[f64], epsilon: f64) -> Result<SoftRankResult> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(invalid_param(format!("epsilon must be positive and finite, got {epsilon}")));
    }
    check_finite(theta, "scores")?;
    let z: Vec<f64> = theta.iter().map(|t| -t / epsilon).collect();
    check_finite(&z, "scaled scores")?;
    let n = theta.len();
    let rho: Vec<f64> = (0..n).map(|i| (n - i) as f64).collect();
    let (soft_ranks, sort_perm, blocks) = project_unchecked(&z, &rho);
    Ok(SoftRankResult {
        soft_ranks,
        sort_perm,
        blocks: blocks.ranges().collect(),
        epsilon,
    })
}

/// Vector-Jacobian product `Jᵀ g` of [`soft_rank`] at the point that produced
/// `result`. The Jacobian is symmetric, so this is also the JVP. O(n).
pub fn soft_rank_vjp(result: &SoftRankResult, g: &[f64], epsilon: f64) -> Result<Vec<f64>> {
    if g.len() != result.len() {
        return Err(invalid_input(format!(
            "length mismatch: gradient has {} entries, soft rank has {}",
            g.len(),
            result.len()
        )));
    }
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(invalid_param(format!("epsilon must be positive, got {epsilon}")));
    }
    let scale = -1.0 / epsilon;
    let mut out = vec![0.0; g.len()];
    for range in &result.blocks {
        let idx = &result.sort_perm[range.clone()];
        let mean = idx.iter().map(|&i| g[i]).sum::<f64>() / idx.len() as f64;
        for &i in idx {
            out[i] = scale * (g[i] - mean);
        }
    }
    Ok(out)
}

/// Hard descending ranks (1 for the largest value), ties by index order.
pub fn hard_ranks(theta: &[f64]) -> Vec<f64> {
    let mut ranks = vec![0.0; theta.len()];
    for (k, &i) in descending_order(theta).iter().enumerate() {
        ranks[i] = (k + 1) as f64;
    }
    ranks
}
