//! SoftRankMSE and the ablation losses.
//!
//! Every variant has the same shape: the documents are split into lists, each
//! list is mapped to a rank-like vector, and the loss is
//!
//! ```text
//! L = (1/K) Σ_lists (1 / 2n) ‖target − predicted‖²
//! ```
//!
//! | variant                   | lists                | mapping    |
//! |---------------------------|----------------------|------------|
//! | `PointwiseMse`            | every document alone | identity   |
//! | `ListwiseMse`             | queries              | identity   |
//! | `PointwiseSoftRankMse`    | whole dataset        | soft rank  |
//! | `ListwiseSoftRankMse`     | queries              | soft rank  |
//!
//! Residuals are the negative gradient of `K · L` with respect to the scores:
//! the `1/K` factor is a global constant left to the learning rate.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::data::QueryDataset;
use crate::error::{invalid_input, invalid_param, Error, Result};
use crate::softrank::{soft_rank, soft_rank_vjp, SoftRankResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossVariant {
    /// Plain squared error on labels (GBRT).
    PointwiseMse,
    /// Squared error on labels, normalised per query.
    ListwiseMse,
    /// SoftRankMSE with the whole training set treated as a single list.
    PointwiseSoftRankMse,
    /// SoftRankMSE per query (SoftRankGBM).
    ListwiseSoftRankMse,
}

impl LossVariant {
    pub const ALL: [LossVariant; 4] = [
        LossVariant::PointwiseMse,
        LossVariant::PointwiseSoftRankMse,
        LossVariant::ListwiseMse,
        LossVariant::ListwiseSoftRankMse,
    ];

    /// Command-line / model-file name.
    pub fn name(self) -> &'static str {
        match self {
            LossVariant::PointwiseMse => "mse",
            LossVariant::ListwiseMse => "listwise-mse",
            LossVariant::PointwiseSoftRankMse => "softrank-mse-pointwise",
            LossVariant::ListwiseSoftRankMse => "softrank-mse",
        }
    }

    /// Row name in ablation tables.
    pub fn display_name(self) -> &'static str {
        match self {
            LossVariant::PointwiseMse => "GBRT",
            LossVariant::ListwiseMse => "GBRT (Listwise)",
            LossVariant::PointwiseSoftRankMse => "GBRT + SoftRankMSE",
            LossVariant::ListwiseSoftRankMse => "SoftRankGBM",
        }
    }

    pub fn uses_soft_rank(self) -> bool {
        matches!(self, LossVariant::PointwiseSoftRankMse | LossVariant::ListwiseSoftRankMse)
    }
}

impl fmt::Display for LossVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| invalid_param(format!("unknown loss '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSpec {
    pub variant: LossVariant,
    /// Soft-rank regularisation, used by the soft-rank variants.
    pub epsilon: f64,
}

impl LossSpec {
    pub fn new(variant: LossVariant, epsilon: f64) -> Result<Self> {
        let spec = Self { variant, epsilon };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.variant.uses_soft_rank() && !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(invalid_param(format!(
                "epsilon must be positive for {}, got {}",
                self.variant, self.epsilon
            )));
        }
        Ok(())
    }
}

/// Soft ranks of the relevance labels, one vector per list.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetRanks {
    pub ranks: Vec<Vec<f64>>,
}

impl TargetRanks {
    pub fn len(&self) -> usize {
        self.ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranks.is_empty()
    }

    /// Targets shaped for `spec`: per query, a single dataset-wide list, or
    /// none for the variants that regress on labels directly.
    pub fn for_spec(dataset: &QueryDataset, spec: &LossSpec) -> Result<Self> {
        match spec.variant {
            LossVariant::ListwiseSoftRankMse => precompute_target_ranks(dataset, spec.epsilon),
            LossVariant::PointwiseSoftRankMse => {
                if dataset.is_empty() {
                    return Err(Error::EmptyDataset);
                }
                Ok(Self { ranks: vec![soft_rank(&dataset.labels, spec.epsilon)?.soft_ranks] })
            }
            LossVariant::PointwiseMse | LossVariant::ListwiseMse => Ok(Self { ranks: Vec::new() }),
        }
    }
}

/// Per-query soft ranks of the labels. Equal labels get equal targets.
pub fn precompute_target_ranks(dataset: &QueryDataset, epsilon: f64) -> Result<TargetRanks> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let ranks = (0..dataset.num_queries())
        .into_par_iter()
        .map(|q| soft_rank(dataset.query_labels(q), epsilon).map(|r| r.soft_ranks))
        .collect::<Result<Vec<_>>>()?;
    Ok(TargetRanks { ranks })
}

fn half_mean_sq(target: &[f64], predicted: &[f64]) -> f64 {
    let sq: f64 = target.iter().zip(predicted).map(|(t, p)| (t - p) * (t - p)).sum();
    sq / (2.0 * target.len() as f64)
}

/// `(1/K) Σ_i (1 / 2n_i) ‖R_i − R̂_i‖²`.
pub fn softrank_mse_loss(targets: &TargetRanks, predicted: &[SoftRankResult]) -> Result<f64> {
    if targets.len() != predicted.len() {
        return Err(invalid_input(format!(
            "{} target lists but {} predicted lists",
            targets.len(),
            predicted.len()
        )));
    }
    if targets.is_empty() {
        return Err(invalid_input("no lists to evaluate"));
    }
    let mut total = 0.0;
    for (i, (t, p)) in targets.ranks.iter().zip(predicted).enumerate() {
        if t.len() != p.len() {
            return Err(invalid_input(format!(
                "list {i}: {} targets but {} predictions",
                t.len(),
                p.len()
            )));
        }
        total += half_mean_sq(t, &p.soft_ranks);
    }
    Ok(total / targets.len() as f64)
}

/// Negative gradient of `(1 / 2n) ‖R − R̂(f)‖²` with respect to the scores `f`.
pub fn per_query_gradient(target: &[f64], predicted: &SoftRankResult, epsilon: f64) -> Result<Vec<f64>> {
    if target.len() != predicted.len() {
        return Err(invalid_input(format!(
            "{} targets but {} predictions",
            target.len(),
            predicted.len()
        )));
    }
    let n = target.len() as f64;
    let g_rank: Vec<f64> = predicted
        .soft_ranks
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t) / n)
        .collect();
    let mut grad = soft_rank_vjp(predicted, &g_rank, epsilon)?;
    grad.iter_mut().for_each(|g| *g = -*g);
    Ok(grad)
}

fn check_scores(dataset: &QueryDataset, scores: &[f64]) -> Result<()> {
    if scores.len() != dataset.num_docs() {
        return Err(invalid_input(format!(
            "{} scores for {} documents",
            scores.len(),
            dataset.num_docs()
        )));
    }
    Ok(())
}

fn check_targets(dataset: &QueryDataset, targets: &TargetRanks, spec: &LossSpec) -> Result<()> {
    let expected: Vec<usize> = match spec.variant {
        LossVariant::ListwiseSoftRankMse => dataset.query_ranges().map(|r| r.len()).collect(),
        LossVariant::PointwiseSoftRankMse => vec![dataset.num_docs()],
        _ => return Ok(()),
    };
    let actual: Vec<usize> = targets.ranks.iter().map(Vec::len).collect();
    if expected != actual {
        return Err(invalid_input(format!(
            "target ranks do not match the dataset layout for {}",
            spec.variant
        )));
    }
    Ok(())
}

/// Stacked residuals (negative functional gradient), in document order.
pub fn compute_residuals(
    dataset: &QueryDataset,
    targets: &TargetRanks,
    scores: &[f64],
    spec: &LossSpec,
) -> Result<Vec<f64>> {
    Ok(loss_and_residuals(dataset, targets, scores, spec)?.1)
}

/// The loss value and the residuals from one pass over the lists.
pub fn loss_and_residuals(
    dataset: &QueryDataset,
    targets: &TargetRanks,
    scores: &[f64],
    spec: &LossSpec,
) -> Result<(f64, Vec<f64>)> {
    spec.validate()?;
    check_scores(dataset, scores)?;
    check_targets(dataset, targets, spec)?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let labels = &dataset.labels;
    match spec.variant {
        LossVariant::PointwiseMse => {
            let residuals: Vec<f64> = labels.iter().zip(scores).map(|(y, f)| y - f).collect();
            let loss = residuals.iter().map(|r| r * r).sum::<f64>() / (2.0 * labels.len() as f64);
            Ok((loss, residuals))
        }
        LossVariant::ListwiseMse => {
            let mut residuals = Vec::with_capacity(labels.len());
            let mut total = 0.0;
            for range in dataset.query_ranges() {
                let n = range.len() as f64;
                let (y, f) = (&labels[range.clone()], &scores[range]);
                total += half_mean_sq(y, f);
                residuals.extend(y.iter().zip(f).map(|(y, f)| (y - f) / n));
            }
            Ok((total / dataset.num_queries() as f64, residuals))
        }
        LossVariant::PointwiseSoftRankMse => {
            let predicted = soft_rank(scores, spec.epsilon)?;
            let target = &targets.ranks[0];
            let loss = half_mean_sq(target, &predicted.soft_ranks);
            Ok((loss, per_query_gradient(target, &predicted, spec.epsilon)?))
        }
        LossVariant::ListwiseSoftRankMse => {
            let per_query = dataset
                .query_ranges()
                .collect::<Vec<_>>()
                .into_par_iter()
                .enumerate()
                .map(|(q, range)| {
                    let predicted = soft_rank(&scores[range], spec.epsilon)?;
                    let target = &targets.ranks[q];
                    let loss = half_mean_sq(target, &predicted.soft_ranks);
                    Ok((loss, per_query_gradient(target, &predicted, spec.epsilon)?))
                })
                .collect::<Result<Vec<_>>>()?;
            let mut total = 0.0;
            let mut residuals = Vec::with_capacity(labels.len());
            for (loss, grad) in per_query {
                total += loss;
                residuals.extend(grad);
            }
            Ok((total / dataset.num_queries() as f64, residuals))
        }
    }
}

/// A loss bound to a training set, with targets precomputed once.
#[derive(Debug, Clone)]
pub struct Objective<'a> {
    dataset: &'a QueryDataset,
    spec: LossSpec,
    targets: TargetRanks,
}

impl<'a> Objective<'a> {
    pub fn new(dataset: &'a QueryDataset, spec: LossSpec) -> Result<Self> {
        spec.validate()?;
        if dataset.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let targets = TargetRanks::for_spec(dataset, &spec)?;
        Ok(Self { dataset, spec, targets })
    }

    pub fn spec(&self) -> &LossSpec {
        &self.spec
    }

    pub fn targets(&self) -> &TargetRanks {
        &self.targets
    }

    /// Number of lists `K` the loss averages over.
    pub fn num_lists(&self) -> usize {
        match self.spec.variant {
            LossVariant::PointwiseMse => self.dataset.num_docs(),
            LossVariant::PointwiseSoftRankMse => 1,
            LossVariant::ListwiseMse | LossVariant::ListwiseSoftRankMse => self.dataset.num_queries(),
        }
    }

    pub fn loss(&self, scores: &[f64]) -> Result<f64> {
        Ok(self.loss_and_residuals(scores)?.0)
    }

    pub fn residuals(&self, scores: &[f64]) -> Result<Vec<f64>> {
        Ok(self.loss_and_residuals(scores)?.1)
    }

    pub fn loss_and_residuals(&self, scores: &[f64]) -> Result<(f64, Vec<f64>)> {
        loss_and_residuals(self.dataset, &self.targets, scores, &self.spec)
    }
}
