use std::f64::consts::PI;

use ndarray::Array2;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::Waveform;
use crate::error::{Error, Result};

/// Frames × (nfft/2 + 1) one-sided spectrum.
#[derive(Debug, Clone)]
pub struct ComplexSpectrogram {
    pub values: Array2<Complex64>,
    pub window: usize,
    pub hop: usize,
    pub nfft: usize,
}

impl ComplexSpectrogram {
    pub fn bins(&self) -> usize {
        self.values.ncols()
    }

    pub fn frames(&self) -> usize {
        self.values.nrows()
    }

    pub fn power(&self) -> Array2<f64> {
        self.values.mapv(|c| c.norm_sqr())
    }
}

/// Periodic Hann window of length `n`.
pub fn hann_window(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

/// Number of full frames; partial trailing frames are dropped.
pub fn frame_count(len: usize, window: usize, hop: usize) -> usize {
    if len < window {
        0
    } else {
        1 + (len - window) / hop
    }
}

/// Hann-windowed STFT without centring or padding.
pub fn stft(waveform: &Waveform, window_s: f64, hop_s: f64, nfft: usize) -> Result<ComplexSpectrogram> {
    let rate = waveform.sample_rate() as f64;
    let window = (window_s * rate).round() as usize;
    let hop = (hop_s * rate).round() as usize;
    stft_samples(waveform.samples(), &hann_window(window), hop, nfft)
}

/// STFT over raw samples with an explicit analysis window.
pub(crate) fn stft_samples(
    samples: &[f64],
    window: &[f64],
    hop: usize,
    nfft: usize,
) -> Result<ComplexSpectrogram> {
    let win = window.len();
    if win == 0 || hop == 0 {
        return Err(Error::invalid("window and hop must be positive"));
    }
    if nfft < win {
        return Err(Error::invalid(format!("nfft {nfft} shorter than window {win}")));
    }
    let frames = frame_count(samples.len(), win, hop);
    if frames == 0 {
        return Err(Error::invalid(format!(
            "signal of {} samples shorter than one {win}-sample window",
            samples.len()
        )));
    }
    let bins = nfft / 2 + 1;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(nfft);
    let mut values = Array2::<Complex64>::zeros((frames, bins));
    let mut buf = vec![Complex64::new(0.0, 0.0); nfft];
    for t in 0..frames {
        let frame = &samples[t * hop..t * hop + win];
        for (b, (x, w)) in buf.iter_mut().zip(frame.iter().zip(window)) {
            *b = Complex64::new(x * w, 0.0);
        }
        for b in buf[win..].iter_mut() {
            *b = Complex64::new(0.0, 0.0);
        }
        fft.process(&mut buf);
        for (dst, src) in values.row_mut(t).iter_mut().zip(&buf[..bins]) {
            *dst = *src;
        }
    }
    Ok(ComplexSpectrogram {
        values,
        window: win,
        hop,
        nfft,
    })
}
