//! YIN-style pitch tracking and the F0 contour correlation.

use crate::audio::{frame_count, Waveform};
use crate::error::{Error, Result};
use crate::eval::pearson_lcc;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YinConfig {
    pub window_s: f64,
    pub hop_s: f64,
    pub f_min: f64,
    pub f_max: f64,
    /// Voicing threshold on the cumulative-mean-normalized difference.
    pub threshold: f64,
}

impl Default for YinConfig {
    fn default() -> Self {
        YinConfig {
            window_s: 0.040,
            hop_s: 0.010,
            f_min: 50.0,
            f_max: 500.0,
            threshold: 0.2,
        }
    }
}

/// Per-frame F0 in Hz, zero where unvoiced.
#[derive(Debug, Clone, PartialEq)]
pub struct F0Track {
    pub f0_hz: Vec<f64>,
    pub voiced: Vec<bool>,
    pub frame_shift_s: f64,
}

impl F0Track {
    pub fn new(f0_hz: Vec<f64>, frame_shift_s: f64) -> Self {
        let voiced = f0_hz.iter().map(|&f| f > 0.0).collect();
        F0Track {
            f0_hz,
            voiced,
            frame_shift_s,
        }
    }

    pub fn frames(&self) -> usize {
        self.f0_hz.len()
    }

    pub fn voiced_fraction(&self) -> f64 {
        self.voiced.iter().filter(|&&v| v).count() as f64 / self.frames().max(1) as f64
    }
}

pub fn extract_f0(waveform: &Waveform) -> Result<F0Track> {
    extract_f0_with(waveform, &YinConfig::default())
}

pub fn extract_f0_with(waveform: &Waveform, cfg: &YinConfig) -> Result<F0Track> {
    waveform.require_pipeline_rate()?;
    let rate = waveform.sample_rate() as f64;
    let window = (cfg.window_s * rate).round() as usize;
    let hop = (cfg.hop_s * rate).round() as usize;
    let tau_min = (rate / cfg.f_max).floor() as usize;
    let tau_max = (rate / cfg.f_min).ceil() as usize;
    if tau_max >= window {
        return Err(Error::invalid("analysis window shorter than the longest lag"));
    }
    let integration = window - tau_max;
    let x = waveform.samples();
    let frames = frame_count(x.len(), window, hop);
    if frames == 0 {
        return Err(Error::invalid(format!(
            "waveform of {} samples shorter than one {window}-sample pitch frame",
            x.len()
        )));
    }

    let mut diff = vec![0.0; tau_max + 1];
    let mut cmndf = vec![1.0; tau_max + 1];
    let mut f0 = Vec::with_capacity(frames);
    for t in 0..frames {
        let frame = &x[t * hop..t * hop + window];
        let energy: f64 = frame[..integration].iter().map(|v| v * v).sum();
        if energy <= 1e-12 {
            f0.push(0.0);
            continue;
        }
        for (tau, d) in diff.iter_mut().enumerate().skip(1) {
            *d = frame[..integration]
                .iter()
                .zip(&frame[tau..tau + integration])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
        }
        let mut running = 0.0;
        for tau in 1..=tau_max {
            running += diff[tau];
            cmndf[tau] = if running > 0.0 {
                diff[tau] * tau as f64 / running
            } else {
                1.0
            };
        }
        let Some(mut tau) = (tau_min..=tau_max).find(|&k| cmndf[k] < cfg.threshold) else {
            f0.push(0.0);
            continue;
        };
        while tau < tau_max && cmndf[tau + 1] < cmndf[tau] {
            tau += 1;
        }
        let mut lag = tau as f64;
        if tau > 1 && tau < tau_max {
            let (a, b, c) = (cmndf[tau - 1], cmndf[tau], cmndf[tau + 1]);
            let denom = a - 2.0 * b + c;
            if denom.abs() > 1e-12 {
                lag += 0.5 * (a - c) / denom;
            }
        }
        let hz = rate / lag;
        f0.push(if (cfg.f_min..=cfg.f_max).contains(&hz) { hz } else { 0.0 });
    }
    Ok(F0Track::new(f0, hop as f64 / rate))
}

/// Pearson correlation of F0 over frames voiced in both tracks.
///
/// `Ok(None)` when fewer than two frames are co-voiced or either contour is
/// flat there; the caller treats that as a missing label.
pub fn f0_corr(est: &F0Track, reference: &F0Track) -> Result<Option<f64>> {
    if est.frames() != reference.frames() {
        return Err(Error::invalid(format!(
            "frame count mismatch: {} vs {}",
            est.frames(),
            reference.frames()
        )));
    }
    let (a, b): (Vec<f64>, Vec<f64>) = est
        .f0_hz
        .iter()
        .zip(&reference.f0_hz)
        .zip(est.voiced.iter().zip(&reference.voiced))
        .filter(|(_, (&ve, &vr))| ve && vr)
        .map(|((&fe, &fr), _)| (fe, fr))
        .unzip();
    if a.len() < 2 {
        return Ok(None);
    }
    pearson_lcc(&a, &b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn sine(freq: f64, secs: f64) -> Waveform {
        let n = (secs * 16000.0) as usize;
        let s = (0..n)
            .map(|i| 0.5 * (2.0 * PI * freq * i as f64 / 16000.0).sin())
            .collect();
        Waveform::new(s, 16000).unwrap()
    }

    #[test]
    fn pure_100hz_sine() {
        let track = extract_f0(&sine(100.0, 1.0)).unwrap();
        let good = track
            .f0_hz
            .iter()
            .filter(|&&f| (98.0..=102.0).contains(&f))
            .count();
        assert!(good as f64 >= 0.9 * track.frames() as f64);
    }

    #[test]
    fn silence_is_unvoiced() {
        let track = extract_f0(&Waveform::silence(16000, 16000)).unwrap();
        assert!(track.voiced.iter().all(|v| !v));
        assert_eq!(track.frames(), 1 + (16000 - 640) / 160);
    }

    #[test]
    fn white_noise_is_mostly_unvoiced() {
        let mut worst = 0.0f64;
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = (0..16000).map(|_| rng.random_range(-0.5..0.5)).collect();
            let track = extract_f0(&Waveform::new(s, 16000).unwrap()).unwrap();
            worst = worst.max(track.voiced_fraction());
        }
        assert!(worst <= 0.2, "worst voiced fraction {worst}");
    }

    #[test]
    fn invariants_of_track() {
        let track = extract_f0(&sine(220.0, 0.5)).unwrap();
        for (f, v) in track.f0_hz.iter().zip(&track.voiced) {
            assert_eq!(*v, *f > 0.0);
            if *v {
                assert!((50.0..=500.0).contains(f));
            }
        }
    }

    #[test]
    fn too_short_or_wrong_rate() {
        assert!(extract_f0(&Waveform::silence(639, 16000)).is_err());
        assert!(extract_f0(&Waveform::silence(16000, 8000)).is_err());
    }

    fn track(values: &[f64]) -> F0Track {
        F0Track::new(values.to_vec(), 0.01)
    }

    #[test]
    fn corr_cases() {
        let a = track(&[0.0, 100.0, 110.0, 125.0, 0.0]);
        assert!((f0_corr(&a, &a).unwrap().unwrap() - 1.0).abs() < 1e-12);
        let shifted = track(&[0.0, 112.0, 122.0, 137.0, 0.0]);
        assert!((f0_corr(&shifted, &a).unwrap().unwrap() - 1.0).abs() < 1e-12);
        let r = track(&[100.0, 110.0, 120.0]);
        let e = track(&[120.0, 110.0, 100.0]);
        assert!((f0_corr(&e, &r).unwrap().unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn corr_undefined_with_few_covoiced_frames() {
        let a = track(&[100.0, 0.0, 120.0]);
        let b = track(&[0.0, 110.0, 130.0]);
        assert_eq!(f0_corr(&a, &b).unwrap(), None);
        assert!(f0_corr(&a, &track(&[1.0])).is_err());
    }

    #[test]
    fn corr_symmetric_and_scale_invariant() {
        let a = track(&[100.0, 130.0, 0.0, 120.0, 140.0]);
        let b = track(&[90.0, 150.0, 200.0, 100.0, 0.0]);
        let ab = f0_corr(&a, &b).unwrap().unwrap();
        let ba = f0_corr(&b, &a).unwrap().unwrap();
        assert!((ab - ba).abs() < 1e-12);
        let scaled = track(&[200.0, 260.0, 0.0, 240.0, 280.0]);
        assert!((f0_corr(&scaled, &b).unwrap().unwrap() - ab).abs() < 1e-12);
    }
}
