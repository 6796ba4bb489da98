use crate::audio::Waveform;
use crate::error::{Error, Result};

pub const SI_SNR_MIN_DB: f64 = -30.0;
pub const SI_SNR_MAX_DB: f64 = 40.0;

fn zero_mean(x: &[f64]) -> Vec<f64> {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    x.iter().map(|v| v - mean).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Scale-invariant SNR in dB, clamped to [-30, 40].
///
/// Both signals are made zero-mean, the estimate is projected onto the
/// reference, and the ratio of projected to residual energy is reported.
pub fn si_snr(est: &Waveform, reference: &Waveform) -> Result<f64> {
    if est.len() != reference.len() {
        return Err(Error::invalid(format!(
            "length mismatch: estimate {} vs reference {} samples",
            est.len(),
            reference.len()
        )));
    }
    let e = zero_mean(est.samples());
    let r = zero_mean(reference.samples());
    let ref_energy = dot(&r, &r);
    // constant input leaves only rounding residue after mean removal
    if ref_energy <= r.len() as f64 * 1e-24 {
        return Err(Error::invalid("reference is constant; SI-SNR undefined"));
    }
    let alpha = dot(&e, &r) / ref_energy;
    let (mut target_energy, mut noise_energy) = (0.0, 0.0);
    for (ev, rv) in e.iter().zip(&r) {
        let t = alpha * rv;
        target_energy += t * t;
        noise_energy += (ev - t) * (ev - t);
    }
    let db = if noise_energy == 0.0 {
        f64::INFINITY
    } else if target_energy == 0.0 {
        f64::NEG_INFINITY
    } else {
        10.0 * (target_energy / noise_energy).log10()
    };
    Ok(db.clamp(SI_SNR_MIN_DB, SI_SNR_MAX_DB))
}
