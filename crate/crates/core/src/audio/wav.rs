use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::Waveform;
use crate::error::{Error, Result};

/// Reads a mono PCM16 or IEEE-float32 RIFF/WAVE file.
///
/// PCM16 is scaled by 1/32768, so full-scale negative maps to exactly -1.
/// Multi-channel input is rejected rather than downmixed.
pub fn load_wav(path: impl AsRef<Path>) -> Result<Waveform> {
    let path = path.as_ref();
    let reader = WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::Wav(format!("{}: {other}", path.display())),
    })?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::Wav(format!(
            "{}: channel count {} unsupported",
            path.display(),
            spec.channels
        )));
    }
    let wav_err = |e: hound::Error| Error::Wav(format!("{}: {e}", path.display()));
    let samples: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<std::result::Result<_, _>>()
            .map_err(wav_err)?,
        (SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<std::result::Result<_, _>>()
            .map_err(wav_err)?,
        (format, bits) => {
            return Err(Error::Wav(format!(
                "{}: unsupported codec {format:?}/{bits} bit",
                path.display()
            )))
        }
    };
    Waveform::new(samples, spec.sample_rate)
        .map_err(|e| Error::Wav(format!("{}: {e}", path.display())))
}

/// Writes a mono PCM16 file. Samples outside [-1, 1] are refused.
pub fn write_wav(path: impl AsRef<Path>, waveform: &Waveform) -> Result<()> {
    let path = path.as_ref();
    if let Some((i, s)) = waveform
        .samples()
        .iter()
        .enumerate()
        .find(|(_, s)| s.abs() > 1.0)
    {
        return Err(Error::invalid(format!(
            "sample {i} = {s} outside [-1, 1]; normalize before writing"
        )));
    }
    let spec = WavSpec {
        channels: 1,
        sample_rate: waveform.sample_rate(),
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let to_err = |e: hound::Error| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::Wav(format!("{}: {other}", path.display())),
    };
    let mut writer = WavWriter::create(path, spec).map_err(to_err)?;
    for &s in waveform.samples() {
        let q = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        writer.write_sample(q).map_err(to_err)?;
    }
    writer.finalize().map_err(to_err)
}
