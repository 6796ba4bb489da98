//! Short-time objective intelligibility.
//!
//! Pipeline: resample to 10 kHz, drop frames more than 40 dB below the
//! loudest reference frame, 512-point STFT of 256-sample frames at 50%
//! overlap, 15 one-third-octave bands from 150 Hz, 30-frame segments,
//! clipping of the normalized estimate at a -15 dB SDR bound, and the mean
//! per-band/per-segment correlation of envelopes.

use std::f64::consts::PI;

use ndarray::Array2;

use crate::audio::{resample, Waveform};
use crate::error::{Error, Result};

use crate::audio::stft::stft_samples;

pub const STOI_RATE: u32 = 10_000;
const FRAME: usize = 256;
const NFFT: usize = 512;
const BANDS: usize = 15;
const MIN_FREQ: f64 = 150.0;
const SEGMENT: usize = 30;
const BETA_DB: f64 = -15.0;
const DYN_RANGE_DB: f64 = 40.0;
const EPS: f64 = f64::EPSILON;

/// Symmetric Hann of length n+2 with the zero end points removed.
fn stoi_window(n: usize) -> Vec<f64> {
    (1..=n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / (n + 1) as f64).cos())
        .collect()
}

/// Band matrix (bands × bins): rows select FFT bins covering each band.
fn third_octave_bands(rate: f64) -> Array2<f64> {
    let bins = NFFT / 2 + 1;
    let freqs: Vec<f64> = (0..bins).map(|k| k as f64 * rate / NFFT as f64).collect();
    let nearest = |target: f64| {
        freqs
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - target).abs().total_cmp(&(b.1 - target).abs()))
            .map(|(i, _)| i)
            .unwrap()
    };
    let mut obm = Array2::zeros((BANDS, bins));
    for band in 0..BANDS {
        let k = band as f64;
        let lo = nearest(MIN_FREQ * 2f64.powf((2.0 * k - 1.0) / 6.0));
        let hi = nearest(MIN_FREQ * 2f64.powf((2.0 * k + 1.0) / 6.0));
        for bin in lo..hi {
            obm[[band, bin]] = 1.0;
        }
    }
    obm
}

/// Drops frames of both signals where the reference frame energy is more
/// than `DYN_RANGE_DB` below its loudest frame, then overlap-adds the rest.
fn remove_silent_frames(x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let hop = FRAME / 2;
    let win = stoi_window(FRAME);
    if x.len() < FRAME {
        return (Vec::new(), Vec::new());
    }
    let starts: Vec<usize> = (0..=x.len() - FRAME).step_by(hop).collect();
    let energy_db: Vec<f64> = starts
        .iter()
        .map(|&s| {
            let e: f64 = x[s..s + FRAME]
                .iter()
                .zip(&win)
                .map(|(v, w)| (v * w).powi(2))
                .sum();
            20.0 * (e.sqrt() + EPS).log10()
        })
        .collect();
    let loudest = energy_db.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let kept: Vec<usize> = starts
        .iter()
        .zip(&energy_db)
        .filter(|(_, &e)| loudest - DYN_RANGE_DB - e < 0.0)
        .map(|(&s, _)| s)
        .collect();
    if kept.is_empty() {
        return (Vec::new(), Vec::new());
    }
    let out_len = (kept.len() - 1) * hop + FRAME;
    let mut xs = vec![0.0; out_len];
    let mut ys = vec![0.0; out_len];
    for (i, &s) in kept.iter().enumerate() {
        for j in 0..FRAME {
            xs[i * hop + j] += x[s + j] * win[j];
            ys[i * hop + j] += y[s + j] * win[j];
        }
    }
    (xs, ys)
}

/// Frames × bands one-third-octave envelopes.
fn band_envelopes(x: &[f64], obm: &Array2<f64>) -> Result<Array2<f64>> {
    let spec = stft_samples(x, &stoi_window(FRAME), FRAME / 2, NFFT)?;
    Ok(spec.power().dot(&obm.t()).mapv(f64::sqrt))
}

/// STOI of `est` against `reference`, in [0, 1].
pub fn stoi(est: &Waveform, reference: &Waveform) -> Result<f64> {
    if est.len() != reference.len() {
        return Err(Error::invalid(format!(
            "length mismatch: estimate {} vs reference {} samples",
            est.len(),
            reference.len()
        )));
    }
    if est.sample_rate() != reference.sample_rate() {
        return Err(Error::invalid("estimate and reference sample rates differ"));
    }
    let x = resample(reference, STOI_RATE)?;
    let y = resample(est, STOI_RATE)?;
    let (x, y) = remove_silent_frames(x.samples(), y.samples());
    let too_short = || {
        Error::invalid(format!(
            "fewer than {SEGMENT} analysis frames remain after silence removal"
        ))
    };
    if x.len() < FRAME {
        return Err(too_short());
    }
    let obm = third_octave_bands(STOI_RATE as f64);
    let xe = band_envelopes(&x, &obm)?;
    let ye = band_envelopes(&y, &obm)?;
    let frames = xe.nrows();
    if frames < SEGMENT {
        return Err(too_short());
    }
    let clip = 1.0 + 10f64.powf(-BETA_DB / 20.0);
    let mut total = 0.0;
    let mut count = 0usize;
    let mut xs = [0.0; SEGMENT];
    let mut ys = [0.0; SEGMENT];
    for end in SEGMENT..=frames {
        for band in 0..BANDS {
            for (i, t) in (end - SEGMENT..end).enumerate() {
                xs[i] = xe[[t, band]];
                ys[i] = ye[[t, band]];
            }
            let xn = xs.iter().map(|v| v * v).sum::<f64>().sqrt();
            let yn = ys.iter().map(|v| v * v).sum::<f64>().sqrt();
            let gain = xn / (yn + EPS);
            for i in 0..SEGMENT {
                ys[i] = (ys[i] * gain).min(xs[i] * clip);
            }
            let xm = xs.iter().sum::<f64>() / SEGMENT as f64;
            let ym = ys.iter().sum::<f64>() / SEGMENT as f64;
            let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
            for i in 0..SEGMENT {
                let (a, b) = (xs[i] - xm, ys[i] - ym);
                sxy += a * b;
                sxx += a * a;
                syy += b * b;
            }
            total += sxy / ((sxx.sqrt() + EPS) * (syy.sqrt() + EPS));
            count += 1;
        }
    }
    Ok((total / count as f64).clamp(0.0, 1.0))
}
