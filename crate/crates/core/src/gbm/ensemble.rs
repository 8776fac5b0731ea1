use std::io::{BufRead, Write};

use super::tree::{Node, RegressionTree};
use super::TrainConfig;
use crate::data::FeatureMatrix;
use crate::error::{invalid_param, Error, Result};

const MAGIC: &str = "softrank-gbm-model";
const VERSION: u32 = 1;

/// Additive tree model: `f(x) = base_score + γ Σ_t h_t(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeEnsemble {
    pub trees: Vec<RegressionTree>,
    pub learning_rate: f64,
    pub base_score: f64,
    /// Feature dimension seen in training; wider inputs are rejected.
    pub num_features: usize,
    /// Configuration the model was trained with, if any.
    pub config: Option<TrainConfig>,
}

impl TreeEnsemble {
    pub fn new(num_features: usize, learning_rate: f64, base_score: f64) -> Result<Self> {
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(invalid_param(format!("learning rate must be positive, got {learning_rate}")));
        }
        Ok(Self { trees: Vec::new(), learning_rate, base_score, num_features, config: None })
    }

    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    /// Scores one row. Accumulates tree by tree, in the same order as the
    /// cached training scores, so both agree bit for bit.
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut score = self.base_score;
        for tree in &self.trees {
            score += self.learning_rate * tree.predict_row(row);
        }
        score
    }

    pub fn predict(&self, features: &FeatureMatrix) -> Result<Vec<f64>> {
        if features.cols() > self.num_features {
            return Err(Error::DimensionMismatch {
                expected: self.num_features,
                actual: features.cols(),
            });
        }
        Ok((0..features.rows()).map(|r| self.predict_row(features.row(r))).collect())
    }

    /// Writes the versioned text format. Floats use shortest round-trip
    /// formatting so [`TreeEnsemble::load`] restores them exactly.
    pub fn save<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{MAGIC} v{VERSION}")?;
        writeln!(out, "num_features {}", self.num_features)?;
        writeln!(out, "base_score {:?}", self.base_score)?;
        writeln!(out, "learning_rate {:?}", self.learning_rate)?;
        if let Some(config) = &self.config {
            for (key, value) in config.to_pairs() {
                writeln!(out, "config {key} {value}")?;
            }
        }
        writeln!(out, "num_trees {}", self.trees.len())?;
        for (t, tree) in self.trees.iter().enumerate() {
            writeln!(out, "tree {t} {}", tree.nodes.len())?;
            for (i, node) in tree.nodes.iter().enumerate() {
                match node {
                    Node::Split { feature, threshold, left, right } => {
                        writeln!(out, "{i} split {feature} {threshold:?} {left} {right}")?
                    }
                    Node::Leaf { value } => writeln!(out, "{i} leaf {value:?}")?,
                }
            }
        }
        writeln!(out, "end")?;
        Ok(())
    }

    pub fn load<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = ModelLines { inner: input.lines(), line: 0 };

        let header = lines.next_line()?;
        if header != format!("{MAGIC} v{VERSION}") {
            return Err(Error::Model(format!("unsupported header '{header}'")));
        }
        let num_features: usize = lines.keyed("num_features")?;
        let base_score: f64 = lines.keyed("base_score")?;
        let learning_rate: f64 = lines.keyed("learning_rate")?;

        let mut config_pairs = Vec::new();
        let num_trees: usize = loop {
            let line = lines.next_line()?;
            let mut parts = line.splitn(3, ' ');
            match (parts.next(), parts.next(), parts.next()) {
                (Some("config"), Some(key), Some(value)) => {
                    config_pairs.push((key.to_string(), value.to_string()))
                }
                (Some("num_trees"), Some(n), None) => break lines.parse(n, "tree count")?,
                _ => return Err(lines.error(format!("unexpected line '{line}'"))),
            }
        };
        let config = if config_pairs.is_empty() {
            None
        } else {
            Some(TrainConfig::from_pairs(&config_pairs).map_err(|e| lines.error(e.to_string()))?)
        };

        let mut trees = Vec::with_capacity(num_trees);
        for t in 0..num_trees {
            let line = lines.next_line()?;
            let parts: Vec<&str> = line.split(' ').collect();
            let num_nodes: usize = match parts.as_slice() {
                ["tree", idx, n] if lines.parse::<usize>(idx, "tree index")? == t => {
                    lines.parse(n, "node count")?
                }
                _ => return Err(lines.error(format!("expected 'tree {t} <nodes>'"))),
            };
            let mut nodes = Vec::with_capacity(num_nodes);
            for i in 0..num_nodes {
                let line = lines.next_line()?;
                let parts: Vec<&str> = line.split(' ').collect();
                if parts.first().map(|p| lines.parse::<usize>(p, "node index")).transpose()? != Some(i) {
                    return Err(lines.error(format!("expected node {i}")));
                }
                let node = match parts[1..] {
                    ["split", f, th, l, r] => Node::Split {
                        feature: lines.parse(f, "feature")?,
                        threshold: lines.parse(th, "threshold")?,
                        left: lines.parse(l, "left child")?,
                        right: lines.parse(r, "right child")?,
                    },
                    ["leaf", v] => Node::Leaf { value: lines.parse(v, "leaf value")? },
                    _ => return Err(lines.error(format!("malformed node '{line}'"))),
                };
                nodes.push(node);
            }
            let tree = RegressionTree { nodes };
            tree.validate().map_err(|e| lines.error(format!("tree {t}: {e}")))?;
            if tree.max_feature().is_some_and(|f| f >= num_features) {
                return Err(lines.error(format!("tree {t} splits on a feature beyond num_features")));
            }
            trees.push(tree);
        }
        if lines.next_line()? != "end" {
            return Err(lines.error("expected 'end'"));
        }
        Ok(Self { trees, learning_rate, base_score, num_features, config })
    }
}

struct ModelLines<I> {
    inner: I,
    line: usize,
}

impl<I: Iterator<Item = std::io::Result<String>>> ModelLines<I> {
    fn error(&self, msg: impl std::fmt::Display) -> Error {
        Error::Model(format!("line {}: {msg}", self.line))
    }

    fn next_line(&mut self) -> Result<String> {
        self.line += 1;
        match self.inner.next() {
            Some(line) => Ok(line?.trim_end_matches('\r').to_string()),
            None => Err(self.error("unexpected end of file")),
        }
    }

    fn parse<T: std::str::FromStr>(&self, s: &str, what: &str) -> Result<T> {
        s.parse().map_err(|_| self.error(format!("malformed {what} '{s}'")))
    }

    fn keyed<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let line = self.next_line()?;
        match line.split_once(' ') {
            Some((k, v)) if k == key => self.parse(v, key),
            _ => Err(self.error(format!("expected '{key} <value>'"))),
        }
    }
}
