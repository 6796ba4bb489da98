//! Deterministic synthetic corpus with a learnable label for every metric.
//!
//! Each utterance is a harmonic tone (2 to 4 partials of an f0 in
//! 100-300 Hz, with vibrato, a slow glide and an amplitude envelope) mixed
//! with white noise at an SNR drawn from 15-35 dB. One in eight records is
//! left clean.
//! SI-SNR, STOI and F0-CORR come from the oracles; the other eight labels
//! are fixed functions of the mixing SNR `s` (dB, +inf when clean) and
//! `f = (f0 - 100) / 200`, with `g` the logistic sigmoid:
//!
//! | metric  | label                                   |
//! |---------|-----------------------------------------|
//! | mos     | 1 + 4 g(s / 10)                         |
//! | pesq    | 1 + 3.5 g((s - 10) / 8)                 |
//! | dnsmos  | 1 + 4 g((s - 5) / 10)                   |
//! | utmos   | 1 + 4 g((s - 2) / 8) (0.8 + 0.2 f)      |
//! | sheet   | 1 + 4 g((s + 2) / 12) (0.9 + 0.1 (1 - f)) |
//! | wer     | 1.5 (1 - g(s / 5))                      |
//! | sbert   | g((s + 10) / 8)                         |
//! | spk_sim | tanh((s + 5) / 10) (0.7 + 0.3 f)        |

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::audio::{write_wav, Waveform, PIPELINE_RATE};
use crate::error::{Error, Result};
use crate::manifest::{Manifest, UtteranceRecord};
use crate::metrics::Metric;
use crate::oracle::annotate_pair;

pub const SNR_RANGE_DB: (f64, f64) = (15.0, 35.0);
const CLEAN_EVERY: usize = 8;
const PEAK: f64 = 0.5;
const WORDS: &[&str] = &[
    "the", "a", "small", "red", "bird", "sings", "over", "quiet", "river", "morning", "light", "falls",
    "on", "old", "stone", "walls", "we", "hear", "distant", "bells", "while", "rain", "moves", "across",
    "green", "fields", "and", "children", "laugh", "softly",
];

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Pseudo-labels for the eight metrics without an in-repo oracle.
pub fn pseudo_labels(snr_db: f64, f0_hz: f64) -> Vec<(Metric, f64)> {
    let s = snr_db;
    let f = (f0_hz - 100.0) / 200.0;
    vec![
        (Metric::Mos, 1.0 + 4.0 * sigmoid(s / 10.0)),
        (Metric::Pesq, 1.0 + 3.5 * sigmoid((s - 10.0) / 8.0)),
        (Metric::Dnsmos, 1.0 + 4.0 * sigmoid((s - 5.0) / 10.0)),
        (Metric::Utmos, 1.0 + 4.0 * sigmoid((s - 2.0) / 8.0) * (0.8 + 0.2 * f)),
        (Metric::Sheet, 1.0 + 4.0 * sigmoid((s + 2.0) / 12.0) * (0.9 + 0.1 * (1.0 - f))),
        (Metric::Wer, 1.5 * (1.0 - sigmoid(s / 5.0))),
        (Metric::Sbert, sigmoid((s + 10.0) / 8.0)),
        (Metric::SpkSim, ((s + 5.0) / 10.0).tanh() * (0.7 + 0.3 * f)),
    ]
}

/// Parameters drawn for one utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthUtterance {
    pub id: String,
    pub f0_hz: f64,
    /// `None` for a clean record.
    pub snr_db: Option<f64>,
    pub clean: Waveform,
    pub noisy: Waveform,
    pub text: String,
}

fn harmonic_tone(rng: &mut ChaCha8Rng, f0: f64, n: usize) -> Vec<f64> {
    let fs = PIPELINE_RATE as f64;
    let partials = rng.random_range(2..=4);
    let amps: Vec<f64> = (1..=partials).map(|k| rng.random_range(0.3..1.0) / k as f64).collect();
    let phases: Vec<f64> = (0..partials).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
    let vib_rate = rng.random_range(3.0..6.0);
    let vib_depth = rng.random_range(0.01..0.04);
    let glide = rng.random_range(-0.15..0.15);
    let am_rate = rng.random_range(0.5..2.0);
    let am_phase = rng.random_range(0.0..2.0 * PI);
    let dur = n as f64 / fs;
    let fade = (0.03 * fs) as usize;
    let mut phase = 0.0;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / fs;
        let inst = f0 * (1.0 + glide * t / dur) * (1.0 + vib_depth * (2.0 * PI * vib_rate * t).sin());
        phase += 2.0 * PI * inst / fs;
        let mut v: f64 = amps
            .iter()
            .zip(&phases)
            .enumerate()
            .map(|(k, (a, p))| a * ((k + 1) as f64 * phase + p).sin())
            .sum();
        v *= 0.7 + 0.3 * (2.0 * PI * am_rate * t + am_phase).sin();
        let edge = i.min(n - 1 - i);
        if edge < fade {
            v *= 0.5 - 0.5 * (PI * edge as f64 / fade as f64).cos();
        }
        out.push(v);
    }
    let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    out.iter_mut().for_each(|v| *v *= PEAK / peak);
    out
}

fn mix(rng: &mut ChaCha8Rng, clean: &[f64], snr_db: f64) -> Vec<f64> {
    let rms = (clean.iter().map(|v| v * v).sum::<f64>() / clean.len() as f64).sqrt();
    let noise_rms = rms / 10f64.powf(snr_db / 20.0);
    let mut noisy: Vec<f64> = clean
        .iter()
        .map(|&c| c + noise_rms * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let peak = noisy.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.95 {
        noisy.iter_mut().for_each(|v| *v *= 0.95 / peak);
    }
    noisy
}

/// Draws utterance `index` of the corpus for `seed`; independent of count.
pub fn synth_utterance(seed: u64, index: usize) -> Result<SynthUtterance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    let n = rng.random_range(16_000..=48_000);
    let f0 = rng.random_range(100.0..300.0);
    let clean = harmonic_tone(&mut rng, f0, n);
    let snr_db = (!index.is_multiple_of(CLEAN_EVERY)).then(|| rng.random_range(SNR_RANGE_DB.0..SNR_RANGE_DB.1));
    let noisy = match snr_db {
        Some(s) => mix(&mut rng, &clean, s),
        None => clean.clone(),
    };
    let words = rng.random_range(3..=8);
    let text = (0..words)
        .map(|_| WORDS[rng.random_range(0..WORDS.len())])
        .collect::<Vec<_>>()
        .join(" ");
    Ok(SynthUtterance {
        id: format!("utt{index:05}"),
        f0_hz: f0,
        snr_db,
        clean: Waveform::new(clean, PIPELINE_RATE)?,
        noisy: Waveform::new(noisy, PIPELINE_RATE)?,
        text,
    })
}

fn build_record(seed: u64, index: usize, wav_dir: &Path) -> Result<UtteranceRecord> {
    let u = synth_utterance(seed, index)?;
    let audio: PathBuf = wav_dir.join(format!("{}.wav", u.id));
    let ref_audio: PathBuf = wav_dir.join(format!("{}_ref.wav", u.id));
    write_wav(&audio, &u.noisy)?;
    write_wav(&ref_audio, &u.clean)?;
    let oracle = annotate_pair(&audio, &ref_audio)?;
    let mut record = UtteranceRecord::new(u.id.clone(), audio);
    record.ref_audio = Some(ref_audio);
    record.text = Some(u.text);
    for v in oracle.values() {
        record.metrics.insert(v.metric, v.value);
    }
    if record.metrics.len() != 3 {
        return Err(Error::Training(format!(
            "{}: oracle labels incomplete ({})",
            u.id,
            oracle.notes.join("; ")
        )));
    }
    for (m, v) in pseudo_labels(u.snr_db.unwrap_or(f64::INFINITY), u.f0_hz) {
        record.metrics.insert(m, v);
    }
    Ok(record)
}

/// Writes `count` noisy/clean pairs under `out_dir/wav/` and returns the
/// fully labelled manifest (not yet saved).
pub fn synth_corpus(out_dir: &Path, count: usize, seed: u64) -> Result<Manifest> {
    if count == 0 {
        return Err(Error::invalid("count must be positive"));
    }
    let wav_dir = out_dir.join("wav");
    std::fs::create_dir_all(&wav_dir).map_err(|e| Error::io(&wav_dir, e))?;
    let records = (0..count)
        .into_par_iter()
        .map(|i| build_record(seed, i, &wav_dir))
        .collect::<Result<Vec<_>>>()?;
    Manifest::new(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pseudo_mos_at_zero_db() {
        let labels = pseudo_labels(0.0, 150.0);
        assert_eq!(labels[0], (Metric::Mos, 3.0));
    }

    #[test]
    fn clean_labels_saturate() {
        let labels: std::collections::BTreeMap<_, _> = pseudo_labels(f64::INFINITY, 300.0).into_iter().collect();
        assert_eq!(labels[&Metric::Mos], 5.0);
        assert_eq!(labels[&Metric::Wer], 0.0);
        assert_eq!(labels[&Metric::SpkSim], 1.0);
        for (m, v) in labels {
            let (lo, hi) = m.spec().range;
            assert!(v >= lo && v <= hi, "{m} {v}");
        }
    }

    #[test]
    fn utterances_are_seeded() {
        let a = synth_utterance(3, 5).unwrap();
        assert_eq!(a, synth_utterance(3, 5).unwrap());
        assert_ne!(a.clean, synth_utterance(4, 5).unwrap().clean);
        assert!((1.0..=3.0).contains(&a.clean.duration_s()));
        assert!((100.0..300.0).contains(&a.f0_hz));
        let clean = synth_utterance(3, 0).unwrap();
        assert_eq!(clean.snr_db, None);
        assert_eq!(clean.clean, clean.noisy);
    }

    #[test]
    fn small_corpus_is_fully_labelled() {
        let dir = tempfile::tempdir().unwrap();
        let m = synth_corpus(dir.path(), 9, 1).unwrap();
        assert_eq!(m.records.len(), 9);
        assert!(m.records.iter().all(|r| r.metrics.len() == 11));
        assert_eq!(m.records[0].label(Metric::SiSnr), Some(40.0));
    }
}
