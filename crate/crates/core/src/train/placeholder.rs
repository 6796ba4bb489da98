use std::sync::OnceLock;

use ndarray::Array2;
use rayon::prelude::*;

use super::norm::NormalizationStats;
use crate::audio::{self, FbankConfig, FeatureMatrix, Waveform};
use crate::bpe::{BpeModel, BLANK};
use crate::error::{Error, Result};
use crate::manifest::{Manifest, UtteranceRecord};
use crate::model::{BatchExample, MetricMask, ModelConfig};

/// One second of silence at the pipeline rate.
pub const PLACEHOLDER_SAMPLES: usize = 16_000;

/// Fbank of the one-second zero clip that stands in for missing reference
/// audio (98 × 80, every value at the log floor).
pub fn placeholder_ref_features() -> &'static Array2<f64> {
    static FEATS: OnceLock<Array2<f64>> = OnceLock::new();
    FEATS.get_or_init(|| {
        let silence = Waveform::silence(PLACEHOLDER_SAMPLES, audio::PIPELINE_RATE);
        audio::log_mel_fbank(&silence).expect("fbank of silence").values
    })
}

fn wav_fbank(path: &std::path::Path) -> Result<Array2<f64>> {
    let wav = audio::load_wav(path)?;
    wav.require_pipeline_rate().map_err(|e| match e {
        Error::InvalidInput(msg) => Error::invalid(format!("{}: {msg}", path.display())),
        other => other,
    })?;
    Ok(audio::log_mel_fbank(&wav)?.values)
}

fn target_features(record: &UtteranceRecord) -> Result<Array2<f64>> {
    match &record.features {
        Some(path) => Ok(FeatureMatrix::load_text(path)?.values),
        None => match &record.audio {
            Some(path) => wav_fbank(path),
            None => Err(Error::invalid(format!("{}: record has neither audio nor features", record.id))),
        },
    }
}

fn reference_tokens(record: &UtteranceRecord, bpe: &BpeModel) -> Vec<u32> {
    [&record.text, &record.pseudo_text]
        .into_iter()
        .flatten()
        .map(|t| bpe.encode(t).ids)
        .find(|ids| !ids.is_empty())
        .unwrap_or_else(|| vec![BLANK])
}

/// Prepares one record for the model.
///
/// Missing reference audio becomes the zero-clip Fbank, missing reference
/// text falls back to `pseudo_text` and then to `[BLANK]`. The mask reflects
/// label presence only. With `stats`, present labels are normalized into
/// `targets`; without, targets are zero (inference).
pub fn make_placeholders(
    record: &UtteranceRecord,
    bpe: Option<&BpeModel>,
    config: &ModelConfig,
    stats: Option<&NormalizationStats>,
) -> Result<BatchExample> {
    let target = target_features(record)?;
    if target.ncols() != config.feature_dim {
        return Err(Error::Shape(format!(
            "{}: features have {} dims, model expects {}",
            record.id,
            target.ncols(),
            config.feature_dim
        )));
    }
    let ref_audio = if config.use_ref_audio {
        let fbank_dims = FbankConfig::default().n_mels;
        if config.feature_dim != fbank_dims {
            return Err(Error::Config(format!(
                "reference audio uses {fbank_dims}-dim Fbank but feature_dim is {}",
                config.feature_dim
            )));
        }
        Some(match &record.ref_audio {
            Some(path) => wav_fbank(path)?,
            None => placeholder_ref_features().clone(),
        })
    } else {
        None
    };
    let ref_text = match (config.use_ref_text, bpe) {
        (true, Some(bpe)) => Some(reference_tokens(record, bpe)),
        (true, None) => return Err(Error::Config("reference text enabled but no BPE model given".into())),
        (false, _) => None,
    };
    let metrics = config.metrics.metrics();
    let mut targets = vec![0.0; metrics.len()];
    let mut present = vec![false; metrics.len()];
    for (i, &m) in metrics.iter().enumerate() {
        if let Some(&v) = record.metrics.get(&m) {
            present[i] = true;
            if let Some(s) = stats {
                targets[i] = s.normalize(m, v)?;
            }
        }
    }
    Ok(BatchExample {
        id: record.id.clone(),
        target,
        ref_audio,
        ref_text,
        targets,
        mask: MetricMask { present },
    })
}

/// [`make_placeholders`] over a whole manifest, in parallel, preserving order.
pub fn prepare_examples(
    manifest: &Manifest,
    bpe: Option<&BpeModel>,
    config: &ModelConfig,
    stats: Option<&NormalizationStats>,
) -> Result<Vec<BatchExample>> {
    manifest
        .records
        .par_iter()
        .map(|r| make_placeholders(r, bpe, config, stats))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::{write_wav, LOG_FLOOR};
    use crate::bpe::train_bpe;
    use crate::metrics::Metric;

    fn setup() -> (tempfile::TempDir, UtteranceRecord, BpeModel) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.wav");
        let samples: Vec<f64> = (0..8000).map(|i| 0.3 * (i as f64 * 0.05).sin()).collect();
        write_wav(&path, &Waveform::new(samples, 16_000).unwrap()).unwrap();
        let bpe = train_bpe(&["hello world", "hello there"], 40).unwrap();
        (dir, UtteranceRecord::new("a", path), bpe)
    }

    #[test]
    fn placeholder_reference_is_floor() {
        let f = placeholder_ref_features();
        assert_eq!(f.dim(), (98, 80));
        assert!(f.iter().all(|&v| v == LOG_FLOOR.ln()));
    }

    #[test]
    fn fallbacks_and_mask() {
        let (_dir, mut rec, bpe) = setup();
        rec.pseudo_text = Some("hello".into());
        rec.metrics.insert(Metric::Dnsmos, 3.0);
        rec.metrics.insert(Metric::Utmos, 2.0);
        let cfg = ModelConfig::default();
        let ex = make_placeholders(&rec, Some(&bpe), &cfg, None).unwrap();
        assert_eq!(ex.ref_text.as_deref(), Some(bpe.encode("hello").ids.as_slice()));
        assert_eq!(ex.ref_audio.as_ref().unwrap(), placeholder_ref_features());
        assert_eq!(ex.mask.count(), 2);
        assert_eq!(ex.target.dim(), (48, 80));

        rec.pseudo_text = None;
        let ex = make_placeholders(&rec, Some(&bpe), &cfg, None).unwrap();
        assert_eq!(ex.ref_text, Some(vec![BLANK]));

        rec.text = Some("there".into());
        rec.pseudo_text = Some("hello".into());
        let ex = make_placeholders(&rec, Some(&bpe), &cfg, None).unwrap();
        assert_eq!(ex.ref_text.unwrap(), bpe.encode("there").ids);
    }

    #[test]
    fn mask_ignores_reference_presence() {
        let (_dir, mut rec, bpe) = setup();
        rec.metrics.insert(Metric::Mos, 3.0);
        let cfg = ModelConfig::default();
        let without = make_placeholders(&rec, Some(&bpe), &cfg, None).unwrap().mask;
        rec.ref_audio = rec.audio.clone();
        rec.text = Some("hello".into());
        let with = make_placeholders(&rec, Some(&bpe), &cfg, None).unwrap().mask;
        assert_eq!(with, without);
    }

    #[test]
    fn disabled_references_are_absent() {
        let (_dir, rec, bpe) = setup();
        let cfg = ModelConfig {
            use_ref_audio: false,
            use_ref_text: false,
            ..Default::default()
        };
        let ex = make_placeholders(&rec, Some(&bpe), &cfg, None).unwrap();
        assert!(ex.ref_audio.is_none() && ex.ref_text.is_none());
    }

    #[test]
    fn unreadable_audio_is_error() {
        let (_dir, mut rec, bpe) = setup();
        rec.audio = Some("/nonexistent/x.wav".into());
        assert!(make_placeholders(&rec, Some(&bpe), &ModelConfig::default(), None).is_err());
    }
}
