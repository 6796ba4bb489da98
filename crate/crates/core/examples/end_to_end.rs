//! The full pipeline through the harness: synth, split, annotate, BPE,
//! train, predict, evaluate. Files land in a temporary directory.
//!
//! cargo run --release --example end_to_end -- [count]

use universa::harness::{
    cmd_annotate, cmd_evaluate, cmd_predict, cmd_split, cmd_synth, cmd_train, cmd_train_bpe, RunConfig,
};
use universa::train::LogEvent;

fn main() -> universa::Result<()> {
    let count: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(120);
    let root = std::env::temp_dir().join("universa-e2e-example");
    let synth = root.join("synth");
    let splits = root.join("splits");

    cmd_synth(&synth, count, 3)?;
    let [tr, dv, te] = cmd_split(&synth.join("manifest.jsonl"), &splits, (85, 5, 10), 3)?;
    println!("split {tr}/{dv}/{te}");
    for name in ["train", "dev", "test"] {
        let path = splits.join(format!("{name}.jsonl"));
        if path.exists() {
            cmd_annotate(&path, &path)?;
        }
    }
    let bpe = root.join("bpe.txt");
    cmd_train_bpe(&splits.join("train.jsonl"), &bpe, 100)?;

    let mut config = RunConfig::parse(
        "d_model = 32\nheads = 2\nlayers = 1\nffn_dim = 64\ndropout = 0\nepochs = 20\nbatch_size = 8\npeak_lr = 0.003\nwarmup_steps = 30\nlr_decay = cosine\n",
    )?;
    config.train.seed = 3;
    let run = root.join("run");
    let dev = splits.join("dev.jsonl");
    cmd_train(&config, &splits.join("train.jsonl"), dev.exists().then_some(dev.as_path()), Some(&bpe), &run, &mut |ev| {
        if let LogEvent::Epoch { epoch, train_loss, dev_loss, .. } = ev {
            println!("epoch {epoch}: train {train_loss:.3}, dev {dev_loss:?}");
        }
    })?;

    let predictions = root.join("predictions.jsonl");
    cmd_predict(&run.join("best.ckpt"), &splits.join("test.jsonl"), &predictions)?;
    let report = cmd_evaluate(&predictions, &splits.join("test.jsonl"), None)?;
    print!("{}", report.to_table());
    Ok(())
}
