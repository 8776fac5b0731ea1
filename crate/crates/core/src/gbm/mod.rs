//! Gradient-boosted regression trees driven by a ranking loss.
//!
//! [`train`] starts from `f_0 = 0` and, at every iteration, computes the
//! residuals of the configured loss at the current scores, fits one
//! leaf-wise histogram tree to them over all documents pooled together, and
//! adds `γ · h_t` to the cached training and validation scores.

mod bins;
mod ensemble;
mod tree;

use std::io::Write;

pub use bins::{split_point, BinMapping, BinnedFeatures, MAX_BINS_LIMIT};
pub use ensemble::TreeEnsemble;
pub use tree::{fit_tree, FittedTree, Node, RegressionTree, TreeParams};

use crate::data::QueryDataset;
use crate::error::{invalid_param, Error, Result};
use crate::loss::{LossSpec, LossVariant, Objective};
use crate::metrics::{evaluate, Metric};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub iterations: usize,
    pub learning_rate: f64,
    pub num_leaves: usize,
    pub epsilon: f64,
    pub max_bins: usize,
    pub min_samples_per_leaf: usize,
    pub loss: LossVariant,
    /// Truncation levels for validation metrics.
    pub eval_at: Vec<usize>,
    /// Emit a learning-curve row every this many iterations (and at the end).
    pub eval_every: usize,
    /// Recorded for reproducibility; training itself draws no randomness.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 1000,
            learning_rate: 0.1,
            num_leaves: 255,
            epsilon: 0.01,
            max_bins: 255,
            min_samples_per_leaf: 1,
            loss: LossVariant::ListwiseSoftRankMse,
            eval_at: vec![1, 10],
            eval_every: 1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations < 1 {
            return Err(invalid_param("iterations must be >= 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(invalid_param(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(invalid_param(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(2..=MAX_BINS_LIMIT).contains(&self.max_bins) {
            return Err(invalid_param(format!(
                "max_bins must be in [2, {MAX_BINS_LIMIT}], got {}",
                self.max_bins
            )));
        }
        if self.eval_at.is_empty() || self.eval_at.contains(&0) {
            return Err(invalid_param("truncation levels must be a nonempty list of values >= 1"));
        }
        if self.eval_every < 1 {
            return Err(invalid_param("eval_every must be >= 1"));
        }
        self.tree_params().validate()
    }

    pub fn tree_params(&self) -> TreeParams {
        TreeParams { num_leaves: self.num_leaves, min_samples_per_leaf: self.min_samples_per_leaf }
    }

    pub fn loss_spec(&self) -> LossSpec {
        LossSpec { variant: self.loss, epsilon: self.epsilon }
    }

    pub(crate) fn to_pairs(&self) -> Vec<(&'static str, String)> {
        let ks: Vec<String> = self.eval_at.iter().map(|k| k.to_string()).collect();
        vec![
            ("iterations", self.iterations.to_string()),
            ("learning_rate", format!("{:?}", self.learning_rate)),
            ("num_leaves", self.num_leaves.to_string()),
            ("epsilon", format!("{:?}", self.epsilon)),
            ("max_bins", self.max_bins.to_string()),
            ("min_samples_per_leaf", self.min_samples_per_leaf.to_string()),
            ("loss", self.loss.to_string()),
            ("eval_at", ks.join(",")),
            ("eval_every", self.eval_every.to_string()),
            ("seed", self.seed.to_string()),
        ]
    }

    pub(crate) fn from_pairs(pairs: &[(String, String)]) -> Result<Self> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse().map_err(|_| invalid_param(format!("bad value '{v}' for {key}")))
        }
        let mut c = TrainConfig::default();
        for (key, v) in pairs {
            match key.as_str() {
                "iterations" => c.iterations = num(key, v)?,
                "learning_rate" => c.learning_rate = num(key, v)?,
                "num_leaves" => c.num_leaves = num(key, v)?,
                "epsilon" => c.epsilon = num(key, v)?,
                "max_bins" => c.max_bins = num(key, v)?,
                "min_samples_per_leaf" => c.min_samples_per_leaf = num(key, v)?,
                "loss" => c.loss = v.parse()?,
                "eval_at" => {
                    c.eval_at = v.split(',').map(|k| num(key, k)).collect::<Result<_>>()?
                }
                "eval_every" => c.eval_every = num(key, v)?,
                "seed" => c.seed = num(key, v)?,
                other => return Err(invalid_param(format!("unknown config key '{other}'"))),
            }
        }
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub iteration: usize,
    /// Training loss of the model after this iteration.
    pub train_loss: f64,
    /// Validation metrics, aligned with [`LearningCurve::columns`]; empty
    /// when no validation set was given.
    pub valid: Vec<f64>,
}

/// Per-iteration training loss and validation metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct LearningCurve {
    pub columns: Vec<(Metric, usize)>,
    pub rows: Vec<CurveRow>,
}

impl LearningCurve {
    pub fn last(&self) -> Option<&CurveRow> {
        self.rows.last()
    }

    pub fn column(&self, metric: Metric, k: usize) -> Option<usize> {
        self.columns.iter().position(|&c| c == (metric, k))
    }

    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "iteration\ttrain_loss")?;
        for (metric, k) in &self.columns {
            write!(out, "\t{metric}@{k}")?;
        }
        writeln!(out)?;
        for row in &self.rows {
            write!(out, "{}\t{:.17e}", row.iteration, row.train_loss)?;
            for v in &row.valid {
                write!(out, "\t{v:.6}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Boosts `config.iterations` trees on `dataset`, optionally tracking
/// validation metrics on `valid`.
pub fn train(
    dataset: &QueryDataset,
    config: &TrainConfig,
    valid: Option<&QueryDataset>,
) -> Result<(TreeEnsemble, LearningCurve)> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if let Some(v) = valid {
        if v.num_features() > dataset.num_features() {
            return Err(Error::DimensionMismatch {
                expected: dataset.num_features(),
                actual: v.num_features(),
            });
        }
    }

    let objective = Objective::new(dataset, config.loss_spec())?;
    let mapping = BinMapping::build(&dataset.features, config.max_bins)?;
    let binned = mapping.apply(&dataset.features);
    let params = config.tree_params();

    let mut ensemble = TreeEnsemble::new(dataset.num_features(), config.learning_rate, 0.0)?;
    ensemble.config = Some(config.clone());
    let lr = ensemble.learning_rate;

    let columns: Vec<(Metric, usize)> = match valid {
        Some(_) => [Metric::Ndcg, Metric::Map]
            .into_iter()
            .flat_map(|m| config.eval_at.iter().map(move |&k| (m, k)))
            .collect(),
        None => Vec::new(),
    };
    let mut curve = LearningCurve { columns, rows: Vec::new() };

    let mut scores = vec![ensemble.base_score; dataset.num_docs()];
    let mut valid_scores = valid.map(|v| vec![ensemble.base_score; v.num_docs()]);
    let (_, mut residuals) = objective.loss_and_residuals(&scores)?;

    for t in 1..=config.iterations {
        let fitted = fit_tree(&binned, &mapping, &residuals, &params)?;
        for (s, h) in scores.iter_mut().zip(&fitted.row_outputs) {
            *s += lr * h;
        }
        if let (Some(v), Some(vs)) = (valid, valid_scores.as_mut()) {
            for (r, s) in vs.iter_mut().enumerate() {
                *s += lr * fitted.tree.predict_row(v.features.row(r));
            }
        }
        ensemble.trees.push(fitted.tree);

        let (loss, next) = objective.loss_and_residuals(&scores)?;
        residuals = next;

        if t % config.eval_every == 0 || t == config.iterations {
            let valid_metrics = match (valid, valid_scores.as_ref()) {
                (Some(v), Some(vs)) => {
                    let report = evaluate(v, vs, &config.eval_at)?;
                    curve
                        .columns
                        .iter()
                        .map(|&(m, k)| report.mean(m, k).unwrap_or(0.0))
                        .collect()
                }
                _ => Vec::new(),
            };
            curve.rows.push(CurveRow { iteration: t, train_loss: loss, valid: valid_metrics });
        }
    }
    Ok((ensemble, curve))
}
