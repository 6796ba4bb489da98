//! Train a small model on a synthetic corpus and save its checkpoint.
//!
//! cargo run --release --example train_synthetic -- [steps]

use universa::bpe::train_bpe;
use universa::harness::{manifest_corpus, predict, synth_corpus};
use universa::model::ModelConfig;
use universa::train::{train, LogEvent, LrDecay, TrainConfig};
use universa::Metric;

fn main() -> universa::Result<()> {
    let steps: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(300);
    let dir = std::env::temp_dir().join("universa-train-example");
    let corpus = synth_corpus(&dir, 32, 5)?;
    let bpe = train_bpe(&manifest_corpus(&corpus), 80)?;

    let model = ModelConfig {
        d_model: 32,
        heads: 2,
        layers: 1,
        ffn_dim: 64,
        dropout: 0.0,
        ..Default::default()
    };
    let config = TrainConfig {
        epochs: 1000,
        batch_size: 8,
        peak_lr: 3e-3,
        warmup_steps: steps / 10,
        lr_decay: LrDecay::Cosine,
        max_steps: Some(steps),
        ..Default::default()
    };
    let outcome = train(&corpus, None, &bpe, model, &config, &mut |ev| {
        if let LogEvent::Step { step, lr, loss, .. } = ev {
            if step % 50 == 0 {
                println!("step {step:4} lr {lr:.2e} loss {loss:.4}");
            }
        }
    })?;
    let path = dir.join("model.ckpt");
    outcome.last.save(&path)?;
    println!("saved {} after {} steps", path.display(), outcome.steps);

    let predictions = predict(&outcome.last, &corpus)?;
    for (p, t) in predictions.records.iter().zip(&corpus.records).take(4) {
        println!(
            "{}: mos {:.2} (label {:.2}), si_snr {:5.1} (label {:5.1})",
            p.id,
            p.metrics[&Metric::Mos],
            t.metrics[&Metric::Mos],
            p.metrics[&Metric::SiSnr],
            t.metrics[&Metric::SiSnr]
        );
    }
    Ok(())
}
