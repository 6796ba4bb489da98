//! Audio I/O and the spectral front-end: WAV files, band-limited
//! resampling, a Hann-windowed STFT and log-mel filterbank features.

mod fbank;
mod resample;
pub(crate) mod stft;
mod wav;

pub use fbank::{log_mel_fbank, log_mel_fbank_with, mel_center_frequencies, FbankConfig, LOG_FLOOR};
pub use resample::resample;
pub use stft::{frame_count, hann_window, stft, ComplexSpectrogram};
pub use wav::{load_wav, write_wav};

use ndarray::Array2;

use crate::error::{Error, Result};

/// Sample rate every pipeline-entry waveform must carry.
pub const PIPELINE_RATE: u32 = 16_000;

/// A mono signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::invalid("sample rate must be positive"));
        }
        if samples.is_empty() {
            return Err(Error::invalid("waveform is empty"));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::invalid(format!("sample {i} is not finite")));
        }
        Ok(Waveform {
            samples,
            sample_rate,
        })
    }

    /// `n` zero samples, used for the missing-reference placeholder.
    pub fn silence(n: usize, sample_rate: u32) -> Self {
        Waveform {
            samples: vec![0.0; n.max(1)],
            sample_rate,
        }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    /// Keeps the first `n` samples.
    pub fn truncated(&self, n: usize) -> Waveform {
        Waveform {
            samples: self.samples[..n.clamp(1, self.samples.len())].to_vec(),
            sample_rate: self.sample_rate,
        }
    }

    pub fn require_pipeline_rate(&self) -> Result<()> {
        if self.sample_rate != PIPELINE_RATE {
            return Err(Error::invalid(format!(
                "sample rate {} Hz unsupported, expected {PIPELINE_RATE} Hz",
                self.sample_rate
            )));
        }
        Ok(())
    }
}

/// Frame-major feature matrix (frames × dims).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub values: Array2<f64>,
    pub frame_shift_s: f64,
    pub frame_length_s: f64,
}

impl FeatureMatrix {
    pub fn new(values: Array2<f64>, frame_shift_s: f64, frame_length_s: f64) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::invalid("feature matrix has no frames or no dims"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("feature matrix has non-finite entries"));
        }
        Ok(FeatureMatrix {
            values,
            frame_shift_s,
            frame_length_s,
        })
    }

    pub fn frames(&self) -> usize {
        self.values.nrows()
    }

    pub fn dims(&self) -> usize {
        self.values.ncols()
    }

    /// Reads externally computed features: one frame per line, values
    /// separated by whitespace. Lines starting with `#` are ignored.
    pub fn load_text(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let row = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::invalid(format!("{}:{}: {e}", path.display(), lineno + 1)))?;
            if let Some(first) = rows.first() {
                if first.len() != row.len() {
                    return Err(Error::Shape(format!(
                        "{}:{}: {} values, expected {}",
                        path.display(),
                        lineno + 1,
                        row.len(),
                        first.len()
                    )));
                }
            }
            rows.push(row);
        }
        let dims = rows.first().map_or(0, Vec::len);
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let values = Array2::from_shape_vec((rows.len(), dims), flat)
            .map_err(|e| Error::Shape(e.to_string()))?;
        FeatureMatrix::new(values, 0.0, 0.0)
    }

    pub fn save_text(&self, path: &std::path::Path) -> Result<()> {
        let mut out = String::new();
        for row in self.values.rows() {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}
