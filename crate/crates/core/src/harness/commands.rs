use std::io::Write;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;

use super::config::RunConfig;
use super::synth::synth_corpus;
use crate::bpe::{train_bpe, BpeModel};
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvaluationReport};
use crate::manifest::{split_manifest, Manifest, UtteranceRecord};
use crate::metrics::Metric;
use crate::model::{Checkpoint, ForwardCtx};
use crate::oracle::annotate_pair;
use crate::train::{make_placeholders, train, LogEvent, TrainOutcome};

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Generates the synthetic corpus and saves `out_dir/manifest.jsonl`.
pub fn cmd_synth(out_dir: &Path, count: usize, seed: u64) -> Result<Manifest> {
    create_dir(out_dir)?;
    let manifest = synth_corpus(out_dir, count, seed)?;
    manifest.save(out_dir.join("manifest.jsonl"))?;
    info!("wrote {count} synthetic utterances to {}", out_dir.display());
    Ok(manifest)
}

/// Writes `train.jsonl`, `dev.jsonl` and `test.jsonl`; an empty split is
/// skipped with a warning. Returns the three sizes.
pub fn cmd_split(manifest: &Path, out_dir: &Path, ratios: (u32, u32, u32), seed: u64) -> Result<[usize; 3]> {
    let m = Manifest::load(manifest)?;
    let (tr, dv, te) = split_manifest(&m, ratios, seed)?;
    create_dir(out_dir)?;
    for (name, part) in [("train", &tr), ("dev", &dv), ("test", &te)] {
        if part.records.is_empty() {
            warn!("{name} split is empty; {name}.jsonl not written");
            continue;
        }
        part.save(out_dir.join(format!("{name}.jsonl")))?;
    }
    Ok([tr.len(), dv.len(), te.len()])
}

/// Recomputes SI-SNR, STOI and F0-CORR for every record with reference
/// audio. Labels that cannot be computed are removed with a warning;
/// records without a reference are copied unchanged.
pub fn annotate_manifest(manifest: &Manifest) -> Result<Manifest> {
    let records = manifest
        .records
        .par_iter()
        .map(|r| {
            let mut r = r.clone();
            let (Some(est), Some(reference)) = (&r.audio, &r.ref_audio) else {
                return Ok(r);
            };
            let labels = annotate_pair(est, reference)?;
            for m in [Metric::SiSnr, Metric::Stoi, Metric::F0Corr] {
                r.metrics.remove(&m);
            }
            for v in labels.values() {
                r.metrics.insert(v.metric, v.value);
            }
            for note in &labels.notes {
                warn!("{}: {note}", r.id);
            }
            Ok(r)
        })
        .collect::<Result<Vec<UtteranceRecord>>>()?;
    Ok(Manifest {
        records,
        split: manifest.split,
    })
}

pub fn cmd_annotate(manifest: &Path, out: &Path) -> Result<Manifest> {
    let annotated = annotate_manifest(&Manifest::load(manifest)?)?;
    annotated.save(out)?;
    Ok(annotated)
}

/// Reference text of each record, falling back to its pseudo transcript.
pub fn manifest_corpus(manifest: &Manifest) -> Vec<String> {
    manifest
        .records
        .iter()
        .filter_map(|r| r.text.as_ref().or(r.pseudo_text.as_ref()).cloned())
        .collect()
}

pub fn cmd_train_bpe(manifest: &Path, out: &Path, vocab_size: usize) -> Result<BpeModel> {
    let corpus = manifest_corpus(&Manifest::load(manifest)?);
    if corpus.is_empty() {
        return Err(Error::invalid("manifest has no text or pseudo_text to learn from"));
    }
    let model = train_bpe(&corpus, vocab_size)?;
    model.save(out)?;
    Ok(model)
}

/// Trains and writes `best.ckpt`, `last.ckpt` and `train_log.jsonl` under
/// `out_dir`. Without a BPE file one is learnt from the training text.
pub fn cmd_train(
    config: &RunConfig,
    train_path: &Path,
    dev_path: Option<&Path>,
    bpe_path: Option<&Path>,
    out_dir: &Path,
    log: &mut dyn FnMut(&LogEvent),
) -> Result<TrainOutcome> {
    let train_m = Manifest::load(train_path)?;
    let dev_m = dev_path.map(Manifest::load).transpose()?;
    let bpe = match bpe_path {
        Some(p) => BpeModel::load(p)?,
        None => {
            let corpus = manifest_corpus(&train_m);
            train_bpe(&corpus, config.bpe_vocab_size)?
        }
    };
    create_dir(out_dir)?;
    let log_path = out_dir.join("train_log.jsonl");
    let mut log_file = std::fs::File::create(&log_path).map_err(|e| Error::io(&log_path, e))?;
    let mut write_err = None;
    let outcome = train(&train_m, dev_m.as_ref(), &bpe, config.model.clone(), &config.train, &mut |ev| {
        let line = serde_json::to_string(ev).expect("log events serialize");
        if let Err(e) = writeln!(log_file, "{line}") {
            write_err.get_or_insert(e);
        }
        log(ev);
    })?;
    if let Some(e) = write_err {
        return Err(Error::io(&log_path, e));
    }
    let (best, last) = checkpoint_paths(out_dir);
    outcome.best.save(best)?;
    outcome.last.save(last)?;
    Ok(outcome)
}

/// One prediction row per input record, every configured metric filled in,
/// denormalized and clamped. Non-metric fields are carried over.
pub fn predict(checkpoint: &Checkpoint, manifest: &Manifest) -> Result<Manifest> {
    let model = &checkpoint.model;
    let cfg = model.config();
    let bpe = checkpoint.bpe()?;
    let norm = &checkpoint.meta.normalization;
    let records = manifest
        .records
        .par_iter()
        .map(|r| {
            let ex = make_placeholders(r, bpe.as_ref(), cfg, None)?;
            let (raw, _) = model.forward(&ex.input(), &mut ForwardCtx::eval())?;
            let mut out = r.clone();
            out.metrics.clear();
            for (&m, &z) in model.metrics().iter().zip(&raw) {
                out.metrics.insert(m, m.clamp(norm.denormalize(m, z)?));
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Manifest {
        records,
        split: manifest.split,
    })
}

pub fn cmd_predict(checkpoint: &Path, manifest: &Path, out: &Path) -> Result<Manifest> {
    let ckpt = Checkpoint::load(checkpoint)?;
    let predictions = predict(&ckpt, &Manifest::load(manifest)?)?;
    predictions.save(out)?;
    Ok(predictions)
}

/// Evaluates and, with `out`, writes the machine-readable rows there.
pub fn cmd_evaluate(predictions: &Path, truth: &Path, out: Option<&Path>) -> Result<EvaluationReport> {
    let report = evaluate(&Manifest::load(predictions)?, &Manifest::load(truth)?)?;
    if let Some(path) = out {
        std::fs::write(path, report.to_tsv()).map_err(|e| Error::io(path, e))?;
    }
    Ok(report)
}

/// Paths of the two checkpoints `cmd_train` writes.
pub fn checkpoint_paths(out_dir: &Path) -> (PathBuf, PathBuf) {
    (out_dir.join("best.ckpt"), out_dir.join("last.ckpt"))
}
