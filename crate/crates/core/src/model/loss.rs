use ndarray::Array2;
use rayon::prelude::*;

use super::layers::ForwardCtx;
use super::network::{ModelInput, UniVersa};
use super::params::Gradients;
use crate::error::{Error, Result};

/// Per-head label presence, aligned with the model's metric order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetricMask {
    pub present: Vec<bool>,
}

impl MetricMask {
    pub fn all(n: usize) -> Self {
        MetricMask {
            present: vec![true; n],
        }
    }

    pub fn count(&self) -> usize {
        self.present.iter().filter(|&&p| p).count()
    }
}

/// Sum of |pred - target| over present metrics, and its gradient with
/// respect to `raw`. Absent metrics are never read.
pub fn masked_l1_loss(raw: &[f64], target: &[f64], mask: &MetricMask) -> Result<(f64, Vec<f64>)> {
    if raw.len() != target.len() || raw.len() != mask.present.len() {
        return Err(Error::Shape(format!(
            "loss inputs misaligned: {} predictions, {} targets, {} mask flags",
            raw.len(),
            target.len(),
            mask.present.len()
        )));
    }
    let mut loss = 0.0;
    let mut grad = vec![0.0; raw.len()];
    for i in 0..raw.len() {
        if !mask.present[i] {
            continue;
        }
        let diff = raw[i] - target[i];
        loss += diff.abs();
        grad[i] = if diff > 0.0 {
            1.0
        } else if diff < 0.0 {
            -1.0
        } else {
            0.0
        };
    }
    Ok((loss, grad))
}

/// One prepared training utterance: features, placeholder-completed
/// references, normalized targets and the label mask.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchExample {
    pub id: String,
    pub target: Array2<f64>,
    pub ref_audio: Option<Array2<f64>>,
    pub ref_text: Option<Vec<u32>>,
    pub targets: Vec<f64>,
    pub mask: MetricMask,
}

impl BatchExample {
    pub fn input(&self) -> ModelInput<'_> {
        ModelInput {
            target: self.target.view(),
            ref_audio: self.ref_audio.as_ref().map(|a| a.view()),
            ref_text: self.ref_text.as_deref(),
        }
    }
}

fn example_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn single(model: &UniVersa, ex: &BatchExample, ctx: &mut ForwardCtx) -> Result<(f64, Gradients)> {
    let input = ex.input();
    let (raw, cache) = model.forward(&input, ctx)?;
    let (loss, draw) = masked_l1_loss(&raw, &ex.targets, &ex.mask)?;
    Ok((loss, model.backward(&input, &cache, &draw)))
}

/// Summed loss and gradients over a batch.
///
/// Per-utterance gradients are computed independently and added in batch
/// order, so results do not depend on the worker count. `dropout_seed`
/// enables dropout at the configured rate; `None` runs deterministically
/// without it.
pub fn forward_backward(
    model: &UniVersa,
    batch: &[&BatchExample],
    dropout_seed: Option<u64>,
) -> Result<(f64, Gradients)> {
    let rate = model.config().dropout;
    let ctx_for = |i: usize| match dropout_seed {
        Some(seed) => ForwardCtx::train(rate, example_seed(seed, i)),
        None => ForwardCtx::eval(),
    };
    let workers = rayon::current_num_threads().max(1);
    let mut total = 0.0;
    let mut grads = model.params().zero_grads();
    let mut bad = Vec::new();
    for (chunk_idx, chunk) in batch.chunks(workers).enumerate() {
        let results: Vec<Result<(f64, Gradients)>> = chunk
            .par_iter()
            .enumerate()
            .map(|(j, ex)| single(model, ex, &mut ctx_for(chunk_idx * workers + j)))
            .collect();
        for (ex, r) in chunk.iter().zip(results) {
            let (loss, g) = r?;
            if !loss.is_finite() || !g.is_finite() {
                bad.push(ex.id.clone());
            }
            total += loss;
            grads.add_assign(&g);
        }
    }
    if !bad.is_empty() {
        return Err(Error::Training(format!("non-finite loss for utterances {}", bad.join(", "))));
    }
    Ok((total, grads))
}
