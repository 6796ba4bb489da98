//! Flat `key = value` run configuration.
//!
//! ```text
//! # model
//! d_model = 64
//! layers = 2
//! metrics = mos,pesq,stoi
//! # training
//! epochs = 5
//! warmup_steps = 200
//! ```
//!
//! Model keys: `d_model`, `heads`, `layers`, `ffn_dim`, `dropout`,
//! `use_ref_audio`, `use_ref_text`, `metrics`, `feature_dim`. Training keys
//! mirror [`TrainConfig`]. Harness keys: `bpe_vocab_size`, `split_ratios`
//! (`85,5,10`), `synth_count`.

use std::path::Path;

use crate::bpe::DEFAULT_VOCAB_SIZE;
use crate::error::{Error, Result};
use crate::metrics::MetricRegistry;
use crate::model::ModelConfig;
use crate::train::TrainConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub bpe_vocab_size: usize,
    pub split_ratios: (u32, u32, u32),
    pub synth_count: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            bpe_vocab_size: DEFAULT_VOCAB_SIZE,
            split_ratios: (85, 5, 10),
            synth_count: 64,
        }
    }
}

fn value<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config(format!("invalid value {v:?} for {key}")))
}

fn boolean(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("invalid boolean {v:?} for {key}"))),
    }
}

impl RunConfig {
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        if self.train.set(key, v)? {
            return Ok(());
        }
        let m = &mut self.model;
        match key {
            "d_model" => m.d_model = value(key, v)?,
            "heads" => m.heads = value(key, v)?,
            "layers" => m.layers = value(key, v)?,
            "ffn_dim" => m.ffn_dim = value(key, v)?,
            "dropout" => m.dropout = value(key, v)?,
            "feature_dim" => m.feature_dim = value(key, v)?,
            "use_ref_audio" => m.use_ref_audio = boolean(key, v)?,
            "use_ref_text" => m.use_ref_text = boolean(key, v)?,
            "metrics" => m.metrics = MetricRegistry::parse_list(v)?,
            "bpe_vocab_size" => self.bpe_vocab_size = value(key, v)?,
            "synth_count" => self.synth_count = value(key, v)?,
            "split_ratios" => {
                let parts = v.split(',').map(|p| value::<u32>(key, p.trim())).collect::<Result<Vec<_>>>()?;
                match parts[..] {
                    [a, b, c] => self.split_ratios = (a, b, c),
                    _ => return Err(Error::Config(format!("split_ratios needs three values, got {v:?}"))),
                }
            }
            _ => return Err(Error::Config(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            cfg.set(k.trim(), v.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::Metric;

    #[test]
    fn parses_mixed_keys() {
        let cfg = RunConfig::parse(
            "# comment\nd_model = 32\nheads=2 # inline\n\nmetrics = mos, stoi\nuse_ref_text = false\nmax_steps = 10\nsplit_ratios = 80,10,10\n",
        )
        .unwrap();
        assert_eq!(cfg.model.d_model, 32);
        assert_eq!(cfg.model.heads, 2);
        assert!(!cfg.model.use_ref_text);
        assert_eq!(cfg.model.metrics.metrics(), &[Metric::Mos, Metric::Stoi]);
        assert_eq!(cfg.train.max_steps, Some(10));
        assert_eq!(cfg.split_ratios, (80, 10, 10));
    }

    #[test]
    fn errors_name_the_line() {
        let err = RunConfig::parse("d_model = 8\nbogus = 1\n").unwrap_err().to_string();
        assert!(err.contains("line 2") && err.contains("bogus"), "{err}");
        assert!(RunConfig::parse("d_model\n").is_err());
        assert!(RunConfig::parse("use_ref_audio = maybe\n").is_err());
    }
}
