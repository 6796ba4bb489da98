//! Signal-level oracle metrics on a clean/noisy pair.
//!
//! cargo run --example oracle_metrics

use universa::harness::synth_utterance;
use universa::oracle::{extract_f0, f0_corr, si_snr, stoi};

fn main() -> universa::Result<()> {
    let u = synth_utterance(1, 3)?;
    println!("{}: f0 {:.1} Hz, mixed at {:.1} dB", u.id, u.f0_hz, u.snr_db.unwrap_or(f64::INFINITY));

    println!("si_snr   {:8.3} dB", si_snr(&u.noisy, &u.clean)?);
    println!("stoi     {:8.4}", stoi(&u.noisy, &u.clean)?);

    let est = extract_f0(&u.noisy)?;
    let reference = extract_f0(&u.clean)?;
    println!("voiced   {:8.1} % of {} frames", 100.0 * reference.voiced_fraction(), reference.frames());
    match f0_corr(&est, &reference)? {
        Some(r) => println!("f0_corr  {r:8.5}"),
        None => println!("f0_corr  undefined"),
    }
    println!("si_snr of the clean signal against itself: {} dB", si_snr(&u.clean, &u.clean)?);
    Ok(())
}
