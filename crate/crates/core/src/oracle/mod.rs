//! Reference-based signal metrics computed locally: SI-SNR, STOI and the
//! F0 contour correlation, plus batch annotation of (estimate, reference)
//! file pairs.

mod annotate;
mod f0;
mod si_snr;
mod stoi;

pub use annotate::{annotate_pair, annotate_pairs, PairLabels, MAX_TRIM_SAMPLES};
pub use f0::{extract_f0, extract_f0_with, f0_corr, F0Track, YinConfig};
pub use si_snr::{si_snr, SI_SNR_MAX_DB, SI_SNR_MIN_DB};
pub use stoi::{stoi, STOI_RATE};

use crate::metrics::Metric;

/// A single metric label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricValue {
    pub metric: Metric,
    pub value: f64,
}

impl MetricValue {
    /// Builds a label, clamping into the metric's bounds.
    pub fn clamped(metric: Metric, value: f64) -> Self {
        MetricValue {
            metric,
            value: metric.clamp(value),
        }
    }
}
