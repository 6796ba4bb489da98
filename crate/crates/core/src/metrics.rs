//! The metric taxonomy: eleven quality metrics over five domains, each with
//! its natural value range, the clamp applied to training targets and
//! user-facing predictions, and the kind of reference it needs.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    SiSnr,
    Pesq,
    Dnsmos,
    F0Corr,
    Mos,
    Utmos,
    Sheet,
    Wer,
    Stoi,
    Sbert,
    SpkSim,
}

impl Metric {
    pub const ALL: [Metric; 11] = [
        Metric::SiSnr,
        Metric::Pesq,
        Metric::Dnsmos,
        Metric::F0Corr,
        Metric::Mos,
        Metric::Utmos,
        Metric::Sheet,
        Metric::Wer,
        Metric::Stoi,
        Metric::Sbert,
        Metric::SpkSim,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Metric::SiSnr => "si_snr",
            Metric::Pesq => "pesq",
            Metric::Dnsmos => "dnsmos",
            Metric::F0Corr => "f0_corr",
            Metric::Mos => "mos",
            Metric::Utmos => "utmos",
            Metric::Sheet => "sheet",
            Metric::Wer => "wer",
            Metric::Stoi => "stoi",
            Metric::Sbert => "sbert",
            Metric::SpkSim => "spk_sim",
        }
    }

    pub fn spec(self) -> MetricSpec {
        use Domain::*;
        use ReferenceType::*;
        let inf = f64::INFINITY;
        let (domain, range, clamp, reference) = match self {
            Metric::SiSnr => (NoiseLevel, (-inf, inf), (-30.0, 40.0), Signal),
            Metric::Pesq => (NoiseLevel, (1.0, 4.5), (1.0, 4.5), Signal),
            Metric::Dnsmos => (NoiseLevel, (1.0, 5.0), (1.0, 5.0), None),
            Metric::F0Corr => (Prosody, (-1.0, 1.0), (-1.0, 1.0), Signal),
            Metric::Mos => (Naturalness, (1.0, 5.0), (1.0, 5.0), None),
            Metric::Utmos => (Naturalness, (1.0, 5.0), (1.0, 5.0), None),
            Metric::Sheet => (Naturalness, (1.0, 5.0), (1.0, 5.0), None),
            Metric::Wer => (Intelligibility, (0.0, inf), (0.0, 2.0), Text),
            Metric::Stoi => (Intelligibility, (0.0, 1.0), (0.0, 1.0), Signal),
            Metric::Sbert => (Intelligibility, (0.0, 1.0), (0.0, 1.0), Signal),
            Metric::SpkSim => (Speaker, (-1.0, 1.0), (-1.0, 1.0), Signal),
        };
        MetricSpec {
            metric: self,
            domain,
            range,
            clamp,
            reference,
        }
    }

    pub fn clamp(self, value: f64) -> f64 {
        let (lo, hi) = self.spec().clamp;
        value.clamp(lo, hi)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .iter()
            .copied()
            .find(|m| m.id() == s)
            .ok_or_else(|| Error::invalid(format!("unknown metric id {s:?}")))
    }
}

impl Serialize for Metric {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.id())
    }
}

impl<'de> Deserialize<'de> for Metric {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    NoiseLevel,
    Prosody,
    Naturalness,
    Intelligibility,
    Speaker,
}

impl Domain {
    pub fn label(self) -> &'static str {
        match self {
            Domain::NoiseLevel => "Noise level",
            Domain::Prosody => "Prosody",
            Domain::Naturalness => "Naturalness",
            Domain::Intelligibility => "Intelligibility",
            Domain::Speaker => "Speaker characteristics",
        }
    }
}

/// Which reference a metric needs to be computed in the first place.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceType {
    None,
    Signal,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSpec {
    pub metric: Metric,
    pub domain: Domain,
    /// Natural range; may be unbounded.
    pub range: (f64, f64),
    /// Finite bounds applied before normalization and to predictions.
    pub clamp: (f64, f64),
    pub reference: ReferenceType,
}

/// Ordered set of metrics a model predicts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricRegistry {
    metrics: Vec<Metric>,
}

impl Default for MetricRegistry {
    fn default() -> Self {
        MetricRegistry {
            metrics: Metric::ALL.to_vec(),
        }
    }
}

impl MetricRegistry {
    pub fn new(metrics: Vec<Metric>) -> Result<Self> {
        if metrics.is_empty() {
            return Err(Error::Config("metric set is empty".into()));
        }
        for (i, m) in metrics.iter().enumerate() {
            if metrics[..i].contains(m) {
                return Err(Error::Config(format!("metric {m} listed twice")));
            }
        }
        Ok(MetricRegistry { metrics })
    }

    /// Parses a comma-separated list of metric ids.
    pub fn parse_list(list: &str) -> Result<Self> {
        let metrics = list
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::parse)
            .collect::<Result<Vec<_>>>()?;
        Self::new(metrics)
    }

    pub fn metrics(&self) -> &[Metric] {
        &self.metrics
    }

    pub fn len(&self) -> usize {
        self.metrics.len()
    }

    pub fn is_empty(&self) -> bool {
        self.metrics.is_empty()
    }

    pub fn index_of(&self, metric: Metric) -> Option<usize> {
        self.metrics.iter().position(|&m| m == metric)
    }

    pub fn specs(&self) -> impl Iterator<Item = MetricSpec> + '_ {
        self.metrics.iter().map(|m| m.spec())
    }
}
