//! NDCG@k and MAP@k, per query and averaged.
//!
//! Documents are ordered by score descending with ties kept in document
//! order. NDCG uses gain `2^label − 1` and discount `1 / log2(position + 1)`.
//! MAP binarises relevance as `label >= 1` and divides by `min(R, k)`.
//! Queries without any relevant document score 0 and are counted as
//! degenerate; they stay in the mean.

use std::cmp::Ordering;
use std::fmt;
use std::io::Write;

use crate::data::QueryDataset;
use crate::error::{invalid_input, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    Ndcg,
    Map,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Ndcg => "ndcg",
            Metric::Map => "map",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A per-query metric value and whether the query had nothing relevant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueryScore {
    pub value: f64,
    pub degenerate: bool,
}

fn check_args(labels: &[f64], scores: &[f64], k: usize) -> Result<()> {
    if k < 1 {
        return Err(invalid_input("truncation level k must be >= 1"));
    }
    if labels.len() != scores.len() {
        return Err(invalid_input(format!(
            "length mismatch: {} labels, {} scores",
            labels.len(),
            scores.len()
        )));
    }
    if scores.iter().chain(labels).any(|v| !v.is_finite()) {
        return Err(invalid_input("labels and scores must be finite"));
    }
    Ok(())
}

fn ranked_labels(labels: &[f64], scores: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(Ordering::Equal));
    order.into_iter().map(|i| labels[i]).collect()
}

fn dcg(ranked: &[f64], k: usize) -> f64 {
    ranked
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &l)| (l.exp2() - 1.0) / ((i + 2) as f64).log2())
        .sum()
}

pub fn ndcg_at_k(labels: &[f64], scores: &[f64], k: usize) -> Result<QueryScore> {
    check_args(labels, scores, k)?;
    let mut ideal = labels.to_vec();
    ideal.sort_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
    let idcg = dcg(&ideal, k);
    if idcg <= 0.0 {
        return Ok(QueryScore { value: 0.0, degenerate: true });
    }
    let value = dcg(&ranked_labels(labels, scores), k) / idcg;
    Ok(QueryScore { value, degenerate: false })
}

pub fn map_at_k(labels: &[f64], scores: &[f64], k: usize) -> Result<QueryScore> {
    check_args(labels, scores, k)?;
    let total_relevant = labels.iter().filter(|&&l| l >= 1.0).count();
    if total_relevant == 0 {
        return Ok(QueryScore { value: 0.0, degenerate: true });
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, &l) in ranked_labels(labels, scores).iter().take(k).enumerate() {
        if l >= 1.0 {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    let value = sum / total_relevant.min(k) as f64;
    Ok(QueryScore { value, degenerate: false })
}

/// One metric at one truncation level, across all queries.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub metric: Metric,
    pub k: usize,
    pub mean: f64,
    pub per_query: Vec<f64>,
    pub degenerate: usize,
}

impl MetricRow {
    pub fn label(&self) -> String {
        format!("{}@{}", self.metric, self.k)
    }
}

/// NDCG and MAP at each requested k. Rows are ordered NDCG first, then MAP,
/// each in the order the truncation levels were given.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub query_ids: Vec<String>,
    pub rows: Vec<MetricRow>,
}

impl EvalReport {
    pub fn get(&self, metric: Metric, k: usize) -> Option<&MetricRow> {
        self.rows.iter().find(|r| r.metric == metric && r.k == k)
    }

    pub fn mean(&self, metric: Metric, k: usize) -> Option<f64> {
        self.get(metric, k).map(|r| r.mean)
    }

    /// Header plus one tab-separated row per (metric, k).
    pub fn write_table<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "metric\tk\tmean\tqueries\tdegenerate")?;
        for row in &self.rows {
            writeln!(
                out,
                "{}\t{}\t{:.6}\t{}\t{}",
                row.metric,
                row.k,
                row.mean,
                row.per_query.len(),
                row.degenerate
            )?;
        }
        Ok(())
    }

    /// One line per query, one column per (metric, k).
    pub fn write_per_query<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "qid")?;
        for row in &self.rows {
            write!(out, "\t{}", row.label())?;
        }
        writeln!(out)?;
        for (q, qid) in self.query_ids.iter().enumerate() {
            write!(out, "{qid}")?;
            for row in &self.rows {
                write!(out, "\t{:.6}", row.per_query[q])?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut buf = Vec::new();
        self.write_table(&mut buf).map_err(|_| fmt::Error)?;
        f.write_str(&String::from_utf8_lossy(&buf))
    }
}

/// Evaluates `scores` (one per document, dataset order) on every query.
pub fn evaluate(dataset: &QueryDataset, scores: &[f64], ks: &[usize]) -> Result<EvalReport> {
    if scores.len() != dataset.num_docs() {
        return Err(invalid_input(format!(
            "{} scores for {} documents",
            scores.len(),
            dataset.num_docs()
        )));
    }
    if ks.is_empty() {
        return Err(invalid_input("at least one truncation level is required"));
    }
    let mut rows = Vec::with_capacity(2 * ks.len());
    for metric in [Metric::Ndcg, Metric::Map] {
        for &k in ks {
            let mut per_query = Vec::with_capacity(dataset.num_queries());
            let mut degenerate = 0;
            for range in dataset.query_ranges() {
                let labels = &dataset.labels[range.clone()];
                let s = &scores[range];
                let q = match metric {
                    Metric::Ndcg => ndcg_at_k(labels, s, k)?,
                    Metric::Map => map_at_k(labels, s, k)?,
                };
                degenerate += usize::from(q.degenerate);
                per_query.push(q.value);
            }
            let mean = if per_query.is_empty() {
                0.0
            } else {
                per_query.iter().sum::<f64>() / per_query.len() as f64
            };
            rows.push(MetricRow { metric, k, mean, per_query, degenerate });
        }
    }
    Ok(EvalReport { query_ids: dataset.query_ids.clone(), rows })
}
