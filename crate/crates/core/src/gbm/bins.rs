use rayon::prelude::*;

use crate::data::FeatureMatrix;
use crate::error::{invalid_param, Result};

pub const MAX_BINS_LIMIT: usize = 65535;

/// Per-feature split thresholds. A value `x` falls in bin `b` where `b` is the
/// number of thresholds strictly below `x`; splitting after bin `b` sends
/// `x <= thresholds[b]` left.
#[derive(Debug, Clone, PartialEq)]
pub struct BinMapping {
    pub thresholds: Vec<Vec<f64>>,
}

/// Midpoint strictly below `hi` so that `lo <= t < hi`.
pub fn split_point(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid >= hi {
        lo
    } else {
        mid
    }
}

fn column_thresholds(mut values: Vec<f64>, max_bins: usize) -> Vec<f64> {
    values.sort_by(f64::total_cmp);
    let mut distinct: Vec<f64> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    for v in values {
        // -0.0 and 0.0 are one value
        if distinct.last() == Some(&v) {
            *counts.last_mut().unwrap() += 1;
        } else {
            distinct.push(v);
            counts.push(1);
        }
    }
    if distinct.len() <= max_bins {
        return distinct.windows(2).map(|w| split_point(w[0], w[1])).collect();
    }

    // Quantile cuts: bin b ends at the distinct value holding the
    // ceil(b·N/max_bins)-th smallest sample.
    let n: usize = counts.iter().sum();
    let mut thresholds = Vec::with_capacity(max_bins - 1);
    let mut cum = 0usize;
    let mut idx = 0usize;
    for b in 1..max_bins {
        let target = (b * n).div_ceil(max_bins);
        while idx < distinct.len() && cum + counts[idx] < target {
            cum += counts[idx];
            idx += 1;
        }
        if idx + 1 >= distinct.len() {
            break;
        }
        let t = split_point(distinct[idx], distinct[idx + 1]);
        if thresholds.last().is_none_or(|&last| t > last) {
            thresholds.push(t);
        }
    }
    thresholds
}

impl BinMapping {
    /// Quantile bins with at most `max_bins` bins per feature. Features with
    /// no more distinct values than `max_bins` get one bin per value.
    pub fn build(features: &FeatureMatrix, max_bins: usize) -> Result<Self> {
        if !(2..=MAX_BINS_LIMIT).contains(&max_bins) {
            return Err(invalid_param(format!(
                "max_bins must be in [2, {MAX_BINS_LIMIT}], got {max_bins}"
            )));
        }
        let thresholds = (0..features.cols())
            .into_par_iter()
            .map(|f| column_thresholds(features.column(f).collect(), max_bins))
            .collect();
        Ok(Self { thresholds })
    }

    pub fn num_features(&self) -> usize {
        self.thresholds.len()
    }

    pub fn num_bins(&self, feature: usize) -> usize {
        self.thresholds[feature].len() + 1
    }

    pub fn bin(&self, feature: usize, value: f64) -> u16 {
        self.thresholds[feature].partition_point(|&t| t < value) as u16
    }

    /// Bins every value; the result is column-major (`bins[feature][row]`).
    pub fn apply(&self, features: &FeatureMatrix) -> BinnedFeatures {
        let bins = (0..features.cols())
            .into_par_iter()
            .map(|f| features.column(f).map(|v| self.bin(f, v)).collect())
            .collect();
        BinnedFeatures { rows: features.rows(), bins }
    }
}

#[derive(Debug, Clone)]
pub struct BinnedFeatures {
    pub rows: usize,
    pub bins: Vec<Vec<u16>>,
}
