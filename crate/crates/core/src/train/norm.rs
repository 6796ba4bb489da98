use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifest::Manifest;
use crate::metrics::{Metric, MetricRegistry};

/// Lower bound on a metric's standard deviation so constant labels
/// normalize to zero instead of dividing by zero.
pub const STD_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricStats {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

/// Per-metric mean and standard deviation of clamped training labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub stats: BTreeMap<Metric, MetricStats>,
}

impl NormalizationStats {
    pub fn get(&self, metric: Metric) -> Result<&MetricStats> {
        self.stats
            .get(&metric)
            .ok_or_else(|| Error::Config(format!("no normalization statistics for {metric}")))
    }

    /// Clamps `value` to the metric range, then standardizes it.
    pub fn normalize(&self, metric: Metric, value: f64) -> Result<f64> {
        let s = self.get(metric)?;
        Ok((metric.clamp(value) - s.mean) / s.std)
    }

    pub fn denormalize(&self, metric: Metric, value: f64) -> Result<f64> {
        let s = self.get(metric)?;
        Ok(value * s.std + s.mean)
    }
}

/// Population statistics over the labels present in `manifest`.
///
/// Fails when a configured metric has no label at all.
pub fn compute_norm_stats(manifest: &Manifest, registry: &MetricRegistry) -> Result<NormalizationStats> {
    let mut stats = BTreeMap::new();
    for &metric in registry.metrics() {
        let values: Vec<f64> = manifest
            .records
            .iter()
            .filter_map(|r| r.metrics.get(&metric))
            .map(|&v| metric.clamp(v))
            .collect();
        if values.is_empty() {
            return Err(Error::Config(format!("metric {metric} has no labels in the training manifest")));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        stats.insert(
            metric,
            MetricStats {
                mean,
                std: var.sqrt().max(STD_FLOOR),
                count: values.len(),
            },
        );
    }
    Ok(NormalizationStats { stats })
}
