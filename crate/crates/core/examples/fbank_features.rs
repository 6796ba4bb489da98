//! Load (or synthesize) a waveform, resample it and compute log-mel features.
//!
//! cargo run --example fbank_features -- [input.wav]

use universa::audio::{load_wav, log_mel_fbank, resample, stft, Waveform, PIPELINE_RATE};

fn main() -> universa::Result<()> {
    let wav = match std::env::args().nth(1) {
        Some(path) => load_wav(path)?,
        None => {
            let samples = (0..22_050)
                .map(|i| 0.4 * (2.0 * std::f64::consts::PI * 440.0 * i as f64 / 22_050.0).sin())
                .collect();
            Waveform::new(samples, 22_050)?
        }
    };
    println!("input: {} samples at {} Hz ({:.2} s)", wav.len(), wav.sample_rate(), wav.duration_s());

    let wav = resample(&wav, PIPELINE_RATE)?;
    println!("resampled: {} samples at {} Hz", wav.len(), wav.sample_rate());

    let spec = stft(&wav, 0.025, 0.010, 512)?;
    let power = spec.power();
    let peak_bin = power.row(power.nrows() / 2).iter().enumerate().fold((0, 0.0), |best, (k, &p)| {
        if p > best.1 { (k, p) } else { best }
    }).0;
    println!("stft: {} frames x {} bins, mid-frame peak at {:.0} Hz", spec.frames(), spec.bins(), peak_bin as f64 * 16_000.0 / 512.0);

    let fbank = log_mel_fbank(&wav)?;
    println!("fbank: {} frames x {} mels", fbank.frames(), fbank.dims());
    let row = fbank.values.row(fbank.frames() / 2);
    let loudest = row.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
    println!("loudest mel band in the middle frame: {} ({:.2})", loudest.0, loudest.1);
    Ok(())
}
