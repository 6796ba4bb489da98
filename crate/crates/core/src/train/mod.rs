//! Semi-supervised training: target normalization, placeholder references,
//! masked-loss optimization with AdamW under a linear warm-up schedule.

mod adamw;
mod config;
mod norm;
mod placeholder;
mod schedule;
mod trainer;

pub use adamw::{clip_grad_norm, AdamW, AdamWConfig, StepOutcome};
pub use config::TrainConfig;
pub use norm::{compute_norm_stats, MetricStats, NormalizationStats, STD_FLOOR};
pub use placeholder::{make_placeholders, placeholder_ref_features, prepare_examples, PLACEHOLDER_SAMPLES};
pub use schedule::{decayed_lr, lr_schedule, LrDecay};
pub use trainer::{evaluate_loss, train, train_examples, EpochSummary, LogEvent, TrainOutcome};
