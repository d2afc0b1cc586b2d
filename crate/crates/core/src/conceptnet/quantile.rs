//! Empirical-CDF weight normalization fitted on the full weight sample.

use serde::{Deserialize, Serialize};

use super::StoreError;

/// Monotone map from raw weights to [0, 1] quantile positions.
///
/// The reference is the sorted training sample, subsampled to at most
/// `n_quantiles` evenly spaced landmarks when larger. Ties in the training
/// sample map to the lowest rank of the tied block, so repeated weights get
/// the most conservative quantile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileTransform {
    reference: Vec<f64>,
}

impl QuantileTransform {
    /// Fits on `weights`. Errors on an empty sample; non-finite weights are
    /// rejected so the reference stays totally ordered.
    pub fn fit(weights: &[f64], n_quantiles: usize) -> Result<Self, StoreError> {
        if weights.is_empty() || n_quantiles == 0 {
            return Err(StoreError::EmptyReference);
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(StoreError::WeightOutOfRange(f64::NAN));
        }
        let mut sorted: Vec<f64> = weights.to_vec();
        sorted.sort_by(|a, b| a.total_cmp(b));

        let reference = if sorted.len() <= n_quantiles {
            sorted
        } else {
            // Landmarks at evenly spaced quantile positions, interpolating
            // between adjacent order statistics.
            let n = sorted.len();
            (0..n_quantiles)
                .map(|k| {
                    let pos = k as f64 / (n_quantiles - 1) as f64 * (n - 1) as f64;
                    let lo = pos.floor() as usize;
                    let hi = pos.ceil() as usize;
                    if lo == hi {
                        sorted[lo]
                    } else {
                        let frac = pos - lo as f64;
                        sorted[lo] + (sorted[hi] - sorted[lo]) * frac
                    }
                })
                .collect()
        };
        Ok(QuantileTransform { reference })
    }

    /// Number of reference landmarks.
    pub fn reference_len(&self) -> usize {
        self.reference.len()
    }

    pub fn reference(&self) -> &[f64] {
        &self.reference
    }

    /// Maps a raw weight to its empirical quantile in [0, 1].
    ///
    /// Values below the reference clamp to 0, above to 1. Exact matches take
    /// the lowest tied rank; everything else interpolates linearly between
    /// the two bracketing landmarks.
    pub fn transform(&self, x: f64) -> f64 {
        let r = &self.reference;
        let n = r.len();
        if n == 1 {
            // A single landmark gives a degenerate CDF; everything at or
            // below it is rank zero.
            return if x > r[0] { 1.0 } else { 0.0 };
        }
        if x <= r[0] {
            return 0.0;
        }
        if x > r[n - 1] {
            return 1.0;
        }
        let denom = (n - 1) as f64;
        // First index with r[i] >= x.
        let i = r.partition_point(|&v| v < x);
        if r[i] == x {
            return i as f64 / denom;
        }
        // r[i-1] < x < r[i]; interpolate between their quantile positions.
        let (lo, hi) = (r[i - 1], r[i]);
        let frac = (x - lo) / (hi - lo);
        ((i - 1) as f64 + frac) / denom
    }
}
