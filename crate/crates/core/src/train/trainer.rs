use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::adamw::{clip_grad_norm, AdamW, StepOutcome};
use super::config::TrainConfig;
use super::norm::{compute_norm_stats, NormalizationStats};
use super::placeholder::prepare_examples;
use super::schedule::decayed_lr;
use crate::bpe::BpeModel;
use crate::error::{Error, Result};
use crate::manifest::Manifest;
use crate::model::{forward_backward, masked_l1_loss, BatchExample, Checkpoint, ForwardCtx, ModelConfig, UniVersa};

const MAX_BAD_BATCHES: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum LogEvent {
    Step {
        step: usize,
        epoch: usize,
        lr: f64,
        /// Summed masked L1 divided by the batch size.
        loss: f64,
        grad_norm: f64,
    },
    Skipped {
        step: usize,
        reason: String,
    },
    Epoch {
        epoch: usize,
        steps: usize,
        train_loss: f64,
        dev_loss: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochSummary {
    pub epoch: usize,
    pub steps: usize,
    pub train_loss: f64,
    pub dev_loss: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Lowest dev loss; the final model when no dev set was given.
    pub best: Checkpoint,
    pub last: Checkpoint,
    pub history: Vec<EpochSummary>,
    /// Per-step batch losses, in order.
    pub step_losses: Vec<f64>,
    pub steps: usize,
}

/// Mean per-utterance masked L1 with dropout off.
pub fn evaluate_loss(model: &UniVersa, examples: &[BatchExample]) -> Result<f64> {
    if examples.is_empty() {
        return Err(Error::invalid("no examples to evaluate"));
    }
    let losses: Vec<f64> = examples
        .par_iter()
        .map(|ex| {
            let (raw, _) = model.forward(&ex.input(), &mut ForwardCtx::eval())?;
            Ok(masked_l1_loss(&raw, &ex.targets, &ex.mask)?.0)
        })
        .collect::<Result<_>>()?;
    Ok(losses.iter().sum::<f64>() / examples.len() as f64)
}

fn step_seed(seed: u64, step: usize) -> u64 {
    seed.wrapping_mul(0xD134_2543_DE82_EF95) ^ (step as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Full training from manifests: normalization statistics from `train`,
/// placeholder preparation, then [`train_examples`].
pub fn train(
    train: &Manifest,
    dev: Option<&Manifest>,
    bpe: &BpeModel,
    mut model_config: ModelConfig,
    config: &TrainConfig,
    log: &mut dyn FnMut(&LogEvent),
) -> Result<TrainOutcome> {
    config.validate()?;
    model_config.text_vocab_size = bpe.vocab_size();
    model_config.validate()?;
    let stats = compute_norm_stats(train, &model_config.metrics)?;
    let train_ex = prepare_examples(train, Some(bpe), &model_config, Some(&stats))?;
    let dev_ex = match dev {
        Some(d) => prepare_examples(d, Some(bpe), &model_config, Some(&stats))?,
        None => Vec::new(),
    };
    let model = UniVersa::new(model_config, config.seed)?;
    train_examples(model, stats, Some(bpe), &train_ex, &dev_ex, config, log)
}

/// Optimizes `model` on prepared examples.
///
/// Epochs are shuffled from `config.seed`; each step sums the masked loss
/// over the batch, clips, and applies AdamW at the scheduled rate. Three
/// consecutive non-finite batches abort the run.
pub fn train_examples(
    mut model: UniVersa,
    stats: NormalizationStats,
    bpe: Option<&BpeModel>,
    train: &[BatchExample],
    dev: &[BatchExample],
    config: &TrainConfig,
    log: &mut dyn FnMut(&LogEvent),
) -> Result<TrainOutcome> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    let use_dropout = model.config().dropout > 0.0;
    let mut opt = AdamW::new(config.adamw(), model.params().tensors());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut step = 0usize;
    let mut bad_streak = 0usize;
    let mut history = Vec::new();
    let mut step_losses = Vec::new();
    let mut best: Option<(f64, UniVersa, usize)> = None;
    let mut done = false;
    let per_epoch = train.len().div_ceil(config.batch_size);
    let total_steps = config.max_steps.unwrap_or(usize::MAX).min(per_epoch.saturating_mul(config.epochs));

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut epoch_count = 0usize;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&BatchExample> = chunk.iter().map(|&i| &train[i]).collect();
            let seed = use_dropout.then(|| step_seed(config.seed, step));
            let result = forward_backward(&model, &batch, seed);
            let (loss, mut grads) = match result {
                Ok(r) => r,
                Err(Error::Training(msg)) => {
                    bad_streak += 1;
                    log(&LogEvent::Skipped { step: step + 1, reason: msg.clone() });
                    if bad_streak >= MAX_BAD_BATCHES {
                        return Err(Error::Training(format!(
                            "{MAX_BAD_BATCHES} consecutive non-finite batches at step {}; last: {msg}",
                            step + 1
                        )));
                    }
                    continue;
                }
                Err(e) => return Err(e),
            };
            let grad_norm = clip_grad_norm(&mut grads, config.grad_clip_norm);
            let lr = decayed_lr(step + 1, config.peak_lr, config.warmup_steps, config.lr_decay, total_steps);
            if opt.step(model.params_mut().tensors_mut(), grads.tensors(), lr) == StepOutcome::Skipped {
                bad_streak += 1;
                log(&LogEvent::Skipped {
                    step: step + 1,
                    reason: "non-finite gradients".into(),
                });
                if bad_streak >= MAX_BAD_BATCHES {
                    return Err(Error::Training(format!(
                        "{MAX_BAD_BATCHES} consecutive non-finite gradients at step {}",
                        step + 1
                    )));
                }
                continue;
            }
            bad_streak = 0;
            step += 1;
            let batch_loss = loss / batch.len() as f64;
            step_losses.push(batch_loss);
            epoch_loss += loss;
            epoch_count += batch.len();
            log(&LogEvent::Step {
                step,
                epoch,
                lr,
                loss: batch_loss,
                grad_norm,
            });
            if config.max_steps.is_some_and(|m| step >= m) {
                done = true;
                break;
            }
        }
        let dev_loss = if dev.is_empty() {
            None
        } else {
            Some(evaluate_loss(&model, dev)?)
        };
        let summary = EpochSummary {
            epoch,
            steps: step,
            train_loss: if epoch_count > 0 { epoch_loss / epoch_count as f64 } else { f64::NAN },
            dev_loss,
        };
        log(&LogEvent::Epoch {
            epoch,
            steps: step,
            train_loss: summary.train_loss,
            dev_loss,
        });
        history.push(summary);
        if let Some(d) = dev_loss {
            if best.as_ref().is_none_or(|(b, _, _)| d < *b) {
                best = Some((d, model.clone(), epoch));
            }
        }
        if done {
            break;
        }
    }

    let bpe_text = bpe.map(|b| b.to_text());
    let info = |epoch: usize, dev: Option<f64>| {
        let mut m = BTreeMap::new();
        m.insert("epoch".to_string(), epoch.to_string());
        m.insert("steps".to_string(), step.to_string());
        if let Some(d) = dev {
            m.insert("dev_loss".to_string(), format!("{d}"));
        }
        m
    };
    let last_epoch = history.last().map_or(0, |h| h.epoch);
    let last_dev = history.last().and_then(|h| h.dev_loss);
    let mut last = Checkpoint::new(model.clone(), stats.clone(), bpe_text.clone());
    last.meta.info = info(last_epoch, last_dev);
    let best = match best {
        Some((d, m, epoch)) => {
            let mut c = Checkpoint::new(m, stats, bpe_text);
            c.meta.info = info(epoch, Some(d));
            c
        }
        None => {
            log::warn!("no dev set; best checkpoint is the final model");
            last.clone()
        }
    };
    Ok(TrainOutcome {
        best,
        last,
        history,
        step_losses,
        steps: step,
    })
}
