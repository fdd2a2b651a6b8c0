//! Kernel-density bandwidth selection for the CIM kernel.
//!
//! For a window of `N` points in `d` dimensions the per-attribute bandwidth is
//!
//! ```text
//! Sigma = (4 / (2 + d))^(1 / (4 + d)) * Gamma * N^(-1 / (4 + d))
//! ```
//!
//! where `Gamma` holds the per-attribute standard deviations. This is the
//! second-order Gaussian-kernel case of the general rule-of-thumb estimator
//! with its constants already folded in. The representative bandwidth is the
//! median of `Sigma`.

use crate::error::{Error, Result};

/// Substituted for a representative bandwidth of exactly zero (all window
/// attributes constant).
pub const DEGENERATE_SIGMA: f64 = 1e-6;

/// Standard deviation divides by `N` rather than `N - 1`.
pub const POPULATION_STD: bool = true;

#[derive(Debug, Clone, PartialEq)]
pub struct BandwidthEstimate {
    pub per_attribute: Vec<f64>,
    pub representative: f64,
}

impl BandwidthEstimate {
    /// The representative bandwidth, with [`DEGENERATE_SIGMA`] in place of zero.
    pub fn usable(&self) -> f64 {
        if self.representative > 0.0 {
            self.representative
        } else {
            DEGENERATE_SIGMA
        }
    }
}

/// Estimates the bandwidth from a window of equal-length points.
pub fn estimate_sigma<P: AsRef<[f64]>>(window: &[P]) -> Result<BandwidthEstimate> {
    let n = window.len();
    if n == 0 {
        return Err(Error::InvalidArgument("empty bandwidth window".into()));
    }
    let d = window[0].as_ref().len();
    if d == 0 {
        return Err(Error::InvalidArgument("zero-dimensional points".into()));
    }
    for p in window {
        if p.as_ref().len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: p.as_ref().len(),
            });
        }
    }

    let gamma = attribute_std(window, d);
    let df = d as f64;
    let coefficient = (4.0 / (2.0 + df)).powf(1.0 / (4.0 + df));
    let scale = (n as f64).powf(-1.0 / (4.0 + df));
    let per_attribute: Vec<f64> = gamma.iter().map(|g| coefficient * g * scale).collect();
    let representative = median(&per_attribute);
    Ok(BandwidthEstimate {
        per_attribute,
        representative,
    })
}

fn attribute_std<P: AsRef<[f64]>>(window: &[P], d: usize) -> Vec<f64> {
    let n = window.len() as f64;
    let mut mean = vec![0.0; d];
    for p in window {
        for (m, v) in mean.iter_mut().zip(p.as_ref()) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut sq = vec![0.0; d];
    for p in window {
        for ((s, v), m) in sq.iter_mut().zip(p.as_ref()).zip(&mean) {
            let dev = v - m;
            *s += dev * dev;
        }
    }
    let denom = if POPULATION_STD || window.len() < 2 {
        n
    } else {
        n - 1.0
    };
    sq.into_iter().map(|s| (s / denom).sqrt()).collect()
}

/// Median; the mean of the two middle values for even lengths.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    if sorted.len().is_multiple_of(2) {
        (sorted[mid - 1] + sorted[mid]) / 2.0
    } else {
        sorted[mid]
    }
}
