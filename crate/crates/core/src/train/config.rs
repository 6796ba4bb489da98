use serde::{Deserialize, Serialize};

use super::adamw::AdamWConfig;
use super::schedule::LrDecay;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub peak_lr: f64,
    pub warmup_steps: usize,
    /// Shape after warm-up; decays end at the run's last step.
    pub lr_decay: LrDecay,
    pub weight_decay: f64,
    pub grad_clip_norm: f64,
    pub seed: u64,
    /// Order of the per-metric norm in the loss. Each term is a scalar
    /// difference, so every order yields |y - ŷ|.
    pub norm_order: u32,
    /// Stops after this many optimizer steps even mid-epoch.
    pub max_steps: Option<usize>,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            batch_size: 16,
            peak_lr: 1e-3,
            warmup_steps: 25_000,
            lr_decay: LrDecay::Constant,
            weight_decay: 0.01,
            grad_clip_norm: 5.0,
            seed: 0,
            norm_order: 1,
            max_steps: None,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value {value:?} for {key}")))
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be positive".into()));
        }
        if !(self.peak_lr > 0.0 && self.peak_lr.is_finite()) {
            return Err(Error::Config(format!("peak_lr {} must be positive", self.peak_lr)));
        }
        if !(self.weight_decay >= 0.0 && self.grad_clip_norm > 0.0) {
            return Err(Error::Config("weight_decay must be >= 0 and grad_clip_norm > 0".into()));
        }
        if self.norm_order == 0 {
            return Err(Error::Config("norm_order must be at least 1".into()));
        }
        if self.max_steps == Some(0) {
            return Err(Error::Config("max_steps must be positive".into()));
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2) && self.adam_eps > 0.0) {
            return Err(Error::Config("betas must lie in [0, 1) and adam_eps be positive".into()));
        }
        Ok(())
    }

    pub fn adamw(&self) -> AdamWConfig {
        AdamWConfig {
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.adam_eps,
            weight_decay: self.weight_decay,
        }
    }

    /// Sets one field from a config-file entry. Returns `false` for keys
    /// this struct does not own.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        match key {
            "epochs" => self.epochs = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "peak_lr" => self.peak_lr = parse(key, value)?,
            "warmup_steps" => self.warmup_steps = parse(key, value)?,
            "lr_decay" => self.lr_decay = value.parse()?,
            "weight_decay" => self.weight_decay = parse(key, value)?,
            "grad_clip_norm" => self.grad_clip_norm = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "norm_order" => self.norm_order = parse(key, value)?,
            "max_steps" => self.max_steps = Some(parse(key, value)?),
            "beta1" => self.beta1 = parse(key, value)?,
            "beta2" => self.beta2 = parse(key, value)?,
            "adam_eps" => self.adam_eps = parse(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }
}
