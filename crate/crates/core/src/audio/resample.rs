use std::f64::consts::PI;

use super::Waveform;
use crate::error::{Error, Result};

/// Zero crossings of the sinc kernel on each side of the centre tap.
const ZERO_CROSSINGS: usize = 16;
/// Cutoff as a fraction of the lower Nyquist frequency.
const ROLLOFF: f64 = 0.95;
/// Ratios with more phases than this are evaluated on the fly.
const MAX_TABLE_PHASES: usize = 4096;

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Hann-windowed sinc kernel, `tau` in input samples, `cutoff` in cycles
/// per input sample, `half_width` in input samples.
fn kernel(tau: f64, cutoff: f64, half_width: f64) -> f64 {
    if tau.abs() >= half_width {
        return 0.0;
    }
    let x = 2.0 * cutoff * tau;
    let sinc = if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    };
    let window = 0.5 + 0.5 * (PI * tau / half_width).cos();
    2.0 * cutoff * sinc * window
}

/// Band-limited windowed-sinc resampler.
///
/// Output length is `round(len * target / source)`. Equal rates return the
/// input unchanged.
pub fn resample(waveform: &Waveform, target_rate: u32) -> Result<Waveform> {
    if target_rate == 0 {
        return Err(Error::invalid("target rate must be positive"));
    }
    let source_rate = waveform.sample_rate();
    if source_rate == target_rate {
        return Ok(waveform.clone());
    }
    let x = waveform.samples();
    let g = gcd(source_rate as u64, target_rate as u64);
    let up = (target_rate as u64 / g) as usize;
    let down = (source_rate as u64 / g) as usize;

    let ratio = target_rate as f64 / source_rate as f64;
    let cutoff = 0.5 * ratio.min(1.0) * ROLLOFF;
    let half_width = ZERO_CROSSINGS as f64 / (2.0 * cutoff);
    let reach = half_width.ceil() as isize;
    let taps = (2 * reach) as usize;

    let out_len = ((x.len() as f64 * ratio).round() as usize).max(1);

    // taps for output position base + phase/up cover inputs base+j for
    // j in (1-reach)..=reach
    let table: Option<Vec<Vec<f64>>> = (up <= MAX_TABLE_PHASES).then(|| {
        (0..up)
            .map(|p| {
                let frac = p as f64 / up as f64;
                (0..taps)
                    .map(|i| {
                        let j = i as isize + 1 - reach;
                        kernel(frac - j as f64, cutoff, half_width)
                    })
                    .collect()
            })
            .collect()
    });

    let n_in = x.len() as isize;
    let mut out = Vec::with_capacity(out_len);
    for n in 0..out_len {
        let num = n as u64 * down as u64;
        let base = (num / up as u64) as isize;
        let phase = (num % up as u64) as usize;
        let mut acc = 0.0;
        for i in 0..taps {
            let k = base + i as isize + 1 - reach;
            if k < 0 || k >= n_in {
                continue;
            }
            let h = match &table {
                Some(t) => t[phase][i],
                None => {
                    let frac = phase as f64 / up as f64;
                    kernel(frac - (i as isize + 1 - reach) as f64, cutoff, half_width)
                }
            };
            acc += h * x[k as usize];
        }
        out.push(acc);
    }
    Waveform::new(out, target_rate)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(freq: f64, rate: u32, n: usize) -> Waveform {
        let s = (0..n)
            .map(|i| (2.0 * PI * freq * i as f64 / rate as f64).sin())
            .collect();
        Waveform::new(s, rate).unwrap()
    }

    /// Index of the largest-magnitude DFT bin, by direct summation.
    fn dft_peak_hz(x: &[f64], rate: u32) -> f64 {
        let n = x.len();
        let (mut best, mut best_k) = (0.0, 0);
        for k in 1..n / 2 {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, v) in x.iter().enumerate() {
                let a = 2.0 * PI * (k * t) as f64 / n as f64;
                re += v * a.cos();
                im -= v * a.sin();
            }
            let mag = re * re + im * im;
            if mag > best {
                best = mag;
                best_k = k;
            }
        }
        best_k as f64 * rate as f64 / n as f64
    }

    #[test]
    fn identity_when_rates_match() {
        let w = sine(440.0, 16000, 1000);
        assert_eq!(resample(&w, 16000).unwrap(), w);
    }

    #[test]
    fn output_length_formula() {
        let w = sine(440.0, 16000, 16000);
        assert_eq!(resample(&w, 10000).unwrap().len(), 10000);
        let w = sine(440.0, 16000, 1234);
        assert_eq!(resample(&w, 10000).unwrap().len(), 771);
        assert_eq!(resample(&w, 44100).unwrap().len(), 3401);
    }

    #[test]
    fn zero_target_rate_errors() {
        assert!(resample(&sine(1.0, 16000, 10), 0).is_err());
    }

    #[test]
    fn tone_frequency_preserved_16k_to_10k() {
        let w = sine(1000.0, 16000, 3200);
        let r = resample(&w, 10000).unwrap();
        let bin = 10000.0 / r.len() as f64;
        let peak = dft_peak_hz(r.samples(), 10000);
        assert!((peak - 1000.0).abs() <= bin, "peak at {peak} Hz");
    }

    #[test]
    fn passband_amplitude_is_preserved() {
        let w = sine(500.0, 16000, 16000);
        let r = resample(&w, 10000).unwrap();
        let mid = &r.samples()[2000..8000];
        let peak = mid.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!((peak - 1.0).abs() < 0.01, "peak {peak}");
    }

    #[test]
    fn upsampling_preserves_tone() {
        let w = sine(1500.0, 10000, 2000);
        let r = resample(&w, 16000).unwrap();
        let bin = 16000.0 / r.len() as f64;
        assert!((dft_peak_hz(r.samples(), 16000) - 1500.0).abs() <= bin);
    }
}
