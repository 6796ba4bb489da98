use ndarray::Array2;

use super::stft::{hann_window, stft_samples};
use super::{FeatureMatrix, Waveform};
use crate::error::{Error, Result};

/// Floor applied to mel energies before the natural log.
pub const LOG_FLOOR: f64 = 1e-10;

/// Log-mel filterbank parameters. The default is the pipeline front-end:
/// 80 HTK mels over 0–8 kHz, 25 ms Hann window, 10 ms hop, 512-point FFT.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FbankConfig {
    pub sample_rate: u32,
    pub n_mels: usize,
    pub window: usize,
    pub hop: usize,
    pub nfft: usize,
    pub f_min: f64,
    pub f_max: f64,
}

impl Default for FbankConfig {
    fn default() -> Self {
        FbankConfig {
            sample_rate: 16_000,
            n_mels: 80,
            window: 400,
            hop: 160,
            nfft: 512,
            f_min: 0.0,
            f_max: 8000.0,
        }
    }
}

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Filter edge frequencies: `n_mels + 2` points equally spaced in mel.
fn mel_points(cfg: &FbankConfig) -> Vec<f64> {
    let (lo, hi) = (hz_to_mel(cfg.f_min), hz_to_mel(cfg.f_max));
    (0..cfg.n_mels + 2)
        .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (cfg.n_mels + 1) as f64))
        .collect()
}

/// Centre frequency of each triangular filter, in Hz.
pub fn mel_center_frequencies(cfg: &FbankConfig) -> Vec<f64> {
    let pts = mel_points(cfg);
    pts[1..=cfg.n_mels].to_vec()
}

/// (n_mels × bins) triangular weights on the linear-frequency FFT grid.
fn mel_filterbank(cfg: &FbankConfig) -> Array2<f64> {
    let bins = cfg.nfft / 2 + 1;
    let pts = mel_points(cfg);
    Array2::from_shape_fn((cfg.n_mels, bins), |(m, k)| {
        let f = k as f64 * cfg.sample_rate as f64 / cfg.nfft as f64;
        let (l, c, r) = (pts[m], pts[m + 1], pts[m + 2]);
        let rise = (f - l) / (c - l);
        let fall = (r - f) / (r - c);
        rise.min(fall).max(0.0)
    })
}

/// Natural-log mel energies, frames × 80.
pub fn log_mel_fbank(waveform: &Waveform) -> Result<FeatureMatrix> {
    log_mel_fbank_with(waveform, &FbankConfig::default())
}

pub fn log_mel_fbank_with(waveform: &Waveform, cfg: &FbankConfig) -> Result<FeatureMatrix> {
    if waveform.sample_rate() != cfg.sample_rate {
        return Err(Error::invalid(format!(
            "fbank expects {} Hz input, got {} Hz",
            cfg.sample_rate,
            waveform.sample_rate()
        )));
    }
    if waveform.len() < cfg.window {
        return Err(Error::invalid(format!(
            "waveform of {} samples shorter than the {}-sample analysis window",
            waveform.len(),
            cfg.window
        )));
    }
    let spec = stft_samples(waveform.samples(), &hann_window(cfg.window), cfg.hop, cfg.nfft)?;
    let power = spec.power();
    let fb = mel_filterbank(cfg);
    let mel = power.dot(&fb.t()).mapv(|e| e.max(LOG_FLOOR).ln());
    let rate = cfg.sample_rate as f64;
    FeatureMatrix::new(mel, cfg.hop as f64 / rate, cfg.window as f64 / rate)
}
