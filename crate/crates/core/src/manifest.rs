//! One-JSON-object-per-line utterance manifests.
//!
//! ```text
//! {"id":"u1","audio":"u1.wav","ref_audio":"u1_clean.wav","text":"hello","metrics":{"mos":3.5}}
//! ```
//!
//! Keys are exactly `id`, `audio`, `ref_audio`, `text`, `pseudo_text`,
//! `features` and `metrics`; anything else is rejected. Relative paths are
//! resolved against the manifest's directory on load and written back
//! relative to it on save.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::Metric;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Dev,
    Test,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct UtteranceRecord {
    pub id: String,
    pub audio: Option<PathBuf>,
    pub ref_audio: Option<PathBuf>,
    pub text: Option<String>,
    pub pseudo_text: Option<String>,
    pub features: Option<PathBuf>,
    pub metrics: BTreeMap<Metric, f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Row {
    id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    audio: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ref_audio: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pseudo_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    features: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    metrics: BTreeMap<Metric, f64>,
}

impl UtteranceRecord {
    pub fn new(id: impl Into<String>, audio: impl Into<PathBuf>) -> Self {
        UtteranceRecord {
            id: id.into(),
            audio: Some(audio.into()),
            ..Default::default()
        }
    }

    pub fn label(&self, metric: Metric) -> Option<f64> {
        self.metrics.get(&metric).copied()
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if self.id.is_empty() {
            return Err("empty id".into());
        }
        if self.audio.is_none() && self.features.is_none() {
            return Err(format!("record {:?} has neither audio nor features", self.id));
        }
        if let Some((m, v)) = self.metrics.iter().find(|(_, v)| !v.is_finite()) {
            return Err(format!("record {:?}: metric {m} is not finite ({v})", self.id));
        }
        Ok(())
    }

    fn from_row(row: Row, base: &Path) -> Self {
        let resolve = |p: Option<String>| p.map(|p| base.join(p));
        UtteranceRecord {
            id: row.id,
            audio: resolve(row.audio),
            ref_audio: resolve(row.ref_audio),
            text: row.text,
            pseudo_text: row.pseudo_text,
            features: resolve(row.features),
            metrics: row.metrics,
        }
    }

    fn to_row(&self, base: &Path) -> Row {
        let rel = |p: &Option<PathBuf>| {
            p.as_ref().map(|p| {
                p.strip_prefix(base)
                    .unwrap_or(p)
                    .to_string_lossy()
                    .into_owned()
            })
        };
        Row {
            id: self.id.clone(),
            audio: rel(&self.audio),
            ref_audio: rel(&self.ref_audio),
            text: self.text.clone(),
            pseudo_text: self.pseudo_text.clone(),
            features: rel(&self.features),
            metrics: self.metrics.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    pub records: Vec<UtteranceRecord>,
    pub split: Option<Split>,
}

fn base_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

impl Manifest {
    /// Builds a manifest, rejecting duplicate ids and invalid records.
    pub fn new(records: Vec<UtteranceRecord>) -> Result<Self> {
        let mut seen: HashMap<&str, usize> = HashMap::new();
        for (i, r) in records.iter().enumerate() {
            r.validate().map_err(Error::InvalidInput)?;
            if let Some(prev) = seen.insert(&r.id, i) {
                return Err(Error::invalid(format!(
                    "duplicate id {:?} at records {} and {}",
                    r.id,
                    prev + 1,
                    i + 1
                )));
            }
        }
        Ok(Manifest {
            records,
            split: None,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&UtteranceRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    pub fn by_id(&self) -> HashMap<&str, &UtteranceRecord> {
        self.records.iter().map(|r| (r.id.as_str(), r)).collect()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let base = base_dir(path);
        let mut records = Vec::new();
        let mut seen: HashMap<String, usize> = HashMap::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let lineno = i + 1;
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = |msg: String| Error::Manifest {
                path: path.to_path_buf(),
                line: lineno,
                msg,
            };
            let row: Row = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
            let record = UtteranceRecord::from_row(row, &base);
            record.validate().map_err(bad)?;
            if let Some(prev) = seen.insert(record.id.clone(), lineno) {
                return Err(bad(format!(
                    "duplicate id {:?} on lines {prev} and {lineno}",
                    record.id
                )));
            }
            records.push(record);
        }
        if records.is_empty() {
            return Err(Error::Manifest {
                path: path.to_path_buf(),
                line: 0,
                msg: "manifest is empty".into(),
            });
        }
        Ok(Manifest {
            records,
            split: None,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let base = base_dir(path);
        let mut out = Vec::new();
        for r in &self.records {
            serde_json::to_writer(&mut out, &r.to_row(&base))
                .map_err(|e| Error::invalid(e.to_string()))?;
            out.push(b'\n');
        }
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&out).map_err(|e| Error::io(path, e))
    }

    fn tagged(records: Vec<UtteranceRecord>, split: Split) -> Self {
        Manifest {
            records,
            split: Some(split),
        }
    }
}

/// Seeded shuffle followed by contiguous train/dev/test cuts.
///
/// Dev and test sizes are `floor(n * ratio / 100)`; the remainder goes to
/// train.
pub fn split_manifest(
    manifest: &Manifest,
    ratios: (u32, u32, u32),
    seed: u64,
) -> Result<(Manifest, Manifest, Manifest)> {
    let (tr, dv, te) = ratios;
    if tr == 0 || dv == 0 || te == 0 || tr + dv + te != 100 {
        return Err(Error::Config(format!(
            "split ratios {tr}:{dv}:{te} must be positive and sum to 100"
        )));
    }
    let n = manifest.len();
    if n < 3 {
        return Err(Error::invalid(format!("cannot split {n} records three ways")));
    }
    let mut records = manifest.records.clone();
    records.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_dev = n * dv as usize / 100;
    let n_test = n * te as usize / 100;
    let n_train = n - n_dev - n_test;
    for (name, size) in [("dev", n_dev), ("test", n_test)] {
        if size == 0 {
            warn!("{name} split is empty for {n} records at {tr}:{dv}:{te}");
        }
    }
    let test = records.split_off(n_train + n_dev);
    let dev = records.split_off(n_train);
    Ok((
        Manifest::tagged(records, Split::Train),
        Manifest::tagged(dev, Split::Dev),
        Manifest::tagged(test, Split::Test),
    ))
}
