use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::{extract_f0, f0_corr, si_snr, stoi, MetricValue};
use crate::audio::{load_wav, Waveform};
use crate::error::{Error, Result};
use crate::metrics::Metric;

/// Largest length difference (10 ms at 16 kHz) trimmed away silently.
pub const MAX_TRIM_SAMPLES: usize = 160;

/// Oracle labels for one (estimate, reference) pair. A metric that cannot
/// be computed is `None`, with the reason recorded in `notes`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PairLabels {
    pub si_snr: Option<f64>,
    pub stoi: Option<f64>,
    pub f0_corr: Option<f64>,
    pub notes: Vec<String>,
}

impl PairLabels {
    pub fn values(&self) -> Vec<MetricValue> {
        [
            (Metric::SiSnr, self.si_snr),
            (Metric::Stoi, self.stoi),
            (Metric::F0Corr, self.f0_corr),
        ]
        .into_iter()
        .filter_map(|(m, v)| v.map(|v| MetricValue::clamped(m, v)))
        .collect()
    }

    /// Labels for in-memory signals of matching length and rate.
    pub fn compute(est: &Waveform, reference: &Waveform) -> Result<Self> {
        let mut labels = PairLabels {
            si_snr: Some(si_snr(est, reference)?),
            ..PairLabels::default()
        };
        match stoi(est, reference) {
            Ok(v) => labels.stoi = Some(v),
            Err(e) => labels.notes.push(format!("stoi: {e}")),
        }
        let (fe, fr) = (extract_f0(est)?, extract_f0(reference)?);
        match f0_corr(&fe, &fr)? {
            Some(v) => labels.f0_corr = Some(v),
            None => labels
                .notes
                .push("f0_corr: fewer than two co-voiced frames or flat contour".into()),
        }
        Ok(labels)
    }
}

/// Loads a pair, trims a length difference of at most `MAX_TRIM_SAMPLES`
/// and computes SI-SNR, STOI and F0-CORR.
pub fn annotate_pair(est_path: &Path, ref_path: &Path) -> Result<PairLabels> {
    let est = load_wav(est_path)?;
    let reference = load_wav(ref_path)?;
    est.require_pipeline_rate()?;
    reference.require_pipeline_rate()?;
    let diff = est.len().abs_diff(reference.len());
    if diff > MAX_TRIM_SAMPLES {
        return Err(Error::invalid(format!(
            "length mismatch of {diff} samples exceeds {MAX_TRIM_SAMPLES}"
        )));
    }
    let n = est.len().min(reference.len());
    let mut labels = PairLabels::compute(&est.truncated(n), &reference.truncated(n))?;
    if diff > 0 {
        labels.notes.push(format!("trimmed {diff} samples"));
    }
    Ok(labels)
}

/// Annotates pairs in parallel; results come back in input order and one
/// failing pair never affects the others.
pub fn annotate_pairs(pairs: &[(PathBuf, PathBuf)]) -> Vec<Result<PairLabels>> {
    pairs
        .par_iter()
        .map(|(est, reference)| annotate_pair(est, reference))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::write_wav;
    use std::f64::consts::PI;

    fn voiced(n: usize) -> Waveform {
        // gliding harmonic tone so the F0 contour is not flat
        let mut phase = 0.0;
        let s = (0..n)
            .map(|i| {
                let t = i as f64 / 16000.0;
                let f0 = 150.0 * (1.0 + 0.1 * (2.0 * PI * 2.0 * t).sin());
                phase += 2.0 * PI * f0 / 16000.0;
                0.3 * phase.sin() + 0.15 * (2.0 * phase).sin()
            })
            .collect();
        Waveform::new(s, 16000).unwrap()
    }

    #[test]
    fn identical_pair() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.wav");
        write_wav(&p, &voiced(24000)).unwrap();
        let labels = annotate_pair(&p, &p).unwrap();
        assert_eq!(labels.si_snr, Some(40.0));
        assert!(labels.stoi.unwrap() >= 0.999);
        assert!((labels.f0_corr.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn small_length_mismatch_is_trimmed_large_is_refused() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b, c) = (
            dir.path().join("a.wav"),
            dir.path().join("b.wav"),
            dir.path().join("c.wav"),
        );
        let w = voiced(24000);
        write_wav(&a, &w).unwrap();
        write_wav(&b, &w.truncated(23998)).unwrap();
        write_wav(&c, &w.truncated(23000)).unwrap();
        let labels = annotate_pair(&a, &b).unwrap();
        assert_eq!(labels.si_snr, Some(40.0));
        assert!(labels.notes.iter().any(|n| n.contains("trimmed 2")));
        assert!(annotate_pair(&a, &c).is_err());
    }

    #[test]
    fn batch_isolates_failures() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.wav");
        write_wav(&a, &voiced(20000)).unwrap();
        let missing = dir.path().join("missing.wav");
        let pairs = vec![
            (a.clone(), a.clone()),
            (a.clone(), missing),
            (a.clone(), a.clone()),
        ];
        let out = annotate_pairs(&pairs);
        assert!(out[0].is_ok() && out[2].is_ok());
        assert!(out[1].is_err());
    }
}
