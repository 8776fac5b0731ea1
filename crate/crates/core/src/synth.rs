//! Seeded synthetic ranking data.
//!
//! Features are i.i.d. standard normal. A hidden weight vector `w` (unit
//! norm, drawn once per seed) gives each document the score `w·x + noise`,
//! which is quantised into graded labels 0–4 by fixed cut points. Every split
//! produced from one seed shares `w`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::{FeatureMatrix, QueryDataset};
use crate::error::{invalid_param, Result};

/// Score cut points between consecutive label grades.
pub const LABEL_CUTS: [f64; 4] = [0.0, 0.7, 1.3, 1.9];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub docs_per_query: usize,
    pub num_features: usize,
    /// Standard deviation of the score noise; 0 makes labels a pure
    /// function of the features.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self { docs_per_query: 20, num_features: 10, noise: 0.0, seed: 7 }
    }
}

fn label_of(score: f64) -> f64 {
    LABEL_CUTS.iter().filter(|&&c| score > c).count() as f64
}

/// One dataset per entry of `query_counts`, all labelled by the same hidden
/// linear function. Query ids are numbered consecutively across splits.
pub fn generate_splits(config: &SynthConfig, query_counts: &[usize]) -> Result<Vec<QueryDataset>> {
    if config.docs_per_query == 0 || config.num_features == 0 {
        return Err(invalid_param("docs_per_query and num_features must be positive"));
    }
    if !(config.noise >= 0.0 && config.noise.is_finite()) {
        return Err(invalid_param(format!("noise must be nonnegative, got {}", config.noise)));
    }
    if query_counts.contains(&0) {
        return Err(invalid_param("every split needs at least one query"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let d = config.num_features;
    let mut w: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    w.iter_mut().for_each(|v| *v /= norm);

    let mut next_qid = 1usize;
    let mut splits = Vec::with_capacity(query_counts.len());
    for &k in query_counts {
        let n = k * config.docs_per_query;
        let mut features = Vec::with_capacity(n * d);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let row: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let noise: f64 = rng.sample(StandardNormal);
            let score = row.iter().zip(&w).map(|(x, w)| x * w).sum::<f64>() + config.noise * noise;
            labels.push(label_of(score));
            features.extend(row);
        }
        let offsets = (0..=k).map(|q| q * config.docs_per_query).collect();
        let ids = (next_qid..next_qid + k).map(|q| q.to_string()).collect();
        next_qid += k;
        splits.push(QueryDataset::new(FeatureMatrix::new(n, d, features)?, labels, offsets, ids)?);
    }
    Ok(splits)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_shaped() {
        let c = SynthConfig { docs_per_query: 5, num_features: 3, noise: 0.1, seed: 11 };
        let a = generate_splits(&c, &[4, 2]).unwrap();
        let b = generate_splits(&c, &[4, 2]).unwrap();
        assert_eq!(a, b);
        assert_eq!((a[0].num_queries(), a[0].num_docs(), a[0].num_features()), (4, 20, 3));
        assert_eq!(a[1].query_ids, vec!["5", "6"]);
        assert!(a[0].labels.iter().all(|l| (0.0..=4.0).contains(l) && l.fract() == 0.0));
    }

    #[test]
    fn labels_follow_cuts() {
        assert_eq!(label_of(-1.0), 0.0);
        assert_eq!(label_of(0.5), 1.0);
        assert_eq!(label_of(5.0), 4.0);
    }

    #[test]
    fn rejects_bad_config() {
        let c = SynthConfig { noise: -1.0, ..Default::default() };
        assert!(generate_splits(&c, &[1]).is_err());
        assert!(generate_splits(&SynthConfig::default(), &[0]).is_err());
    }
}
