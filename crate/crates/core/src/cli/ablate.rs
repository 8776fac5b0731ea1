use std::io::Write;

use crate::data::QueryDataset;
use crate::error::Result;
use crate::gbm::{train, TrainConfig};
use crate::loss::LossVariant;
use crate::metrics::{evaluate, Metric};

/// One row per loss variant, one column per (metric, k).
#[derive(Debug, Clone, PartialEq)]
pub struct AblationTable {
    pub columns: Vec<(Metric, usize)>,
    pub rows: Vec<(LossVariant, Vec<f64>)>,
}

impl AblationTable {
    pub fn value(&self, variant: LossVariant, metric: Metric, k: usize) -> Option<f64> {
        let col = self.columns.iter().position(|&c| c == (metric, k))?;
        self.rows.iter().find(|(v, _)| *v == variant).map(|(_, vals)| vals[col])
    }

    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "variant")?;
        for (m, k) in &self.columns {
            write!(out, "\t{m}@{k}")?;
        }
        writeln!(out)?;
        for (variant, values) in &self.rows {
            write!(out, "{}", variant.display_name())?;
            for v in values {
                write!(out, "\t{v:.4}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Trains every loss variant with the same settings and evaluates each on
/// `eval_set`. The `loss` field of `config` is ignored.
pub fn run_ablation(
    train_set: &QueryDataset,
    eval_set: &QueryDataset,
    config: &TrainConfig,
) -> Result<AblationTable> {
    let columns: Vec<(Metric, usize)> = [Metric::Ndcg, Metric::Map]
        .into_iter()
        .flat_map(|m| config.eval_at.iter().map(move |&k| (m, k)))
        .collect();
    let mut rows = Vec::with_capacity(LossVariant::ALL.len());
    for variant in LossVariant::ALL {
        let cfg = TrainConfig { loss: variant, ..config.clone() };
        let (model, _) = train(train_set, &cfg, None)?;
        let scores = model.predict(&eval_set.features)?;
        let report = evaluate(eval_set, &scores, &config.eval_at)?;
        let values = columns.iter().map(|&(m, k)| report.mean(m, k).unwrap_or(0.0)).collect();
        rows.push((variant, values));
    }
    Ok(AblationTable { columns, rows })
}
