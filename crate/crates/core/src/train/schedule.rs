use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Learning-rate shape after warm-up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrDecay {
    #[default]
    Constant,
    /// Linear from the peak to zero at the last step.
    Linear,
    /// Half cosine from the peak to zero at the last step.
    Cosine,
}

impl std::str::FromStr for LrDecay {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(LrDecay::Constant),
            "linear" => Ok(LrDecay::Linear),
            "cosine" => Ok(LrDecay::Cosine),
            _ => Err(Error::Config(format!("unknown lr_decay {s:?}"))),
        }
    }
}

/// Linear warm-up to `peak_lr` over `warmup_steps`, constant afterwards.
pub fn lr_schedule(step: usize, peak_lr: f64, warmup_steps: usize) -> f64 {
    if warmup_steps == 0 {
        return peak_lr;
    }
    peak_lr * (step as f64 / warmup_steps as f64).min(1.0)
}

/// [`lr_schedule`] followed by `decay` over the steps up to `total_steps`.
pub fn decayed_lr(step: usize, peak_lr: f64, warmup_steps: usize, decay: LrDecay, total_steps: usize) -> f64 {
    let warm = lr_schedule(step, peak_lr, warmup_steps);
    if step <= warmup_steps || total_steps <= warmup_steps {
        return warm;
    }
    let progress = ((step - warmup_steps) as f64 / (total_steps - warmup_steps) as f64).min(1.0);
    match decay {
        LrDecay::Constant => warm,
        LrDecay::Linear => peak_lr * (1.0 - progress),
        LrDecay::Cosine => peak_lr * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos()),
    }
}
