use std::collections::BTreeMap;

use proptest::prelude::*;
use universa::audio::{resample, Waveform};
use universa::eval::evaluate;
use universa::harness::pseudo_labels;
use universa::oracle::si_snr;
use universa::train::{lr_schedule, MetricStats, NormalizationStats};
use universa::{Manifest, Metric, UtteranceRecord};

fn metric() -> impl Strategy<Value = Metric> {
    prop::sample::select(Metric::ALL.to_vec())
}

fn record(i: usize) -> impl Strategy<Value = UtteranceRecord> {
    (
        prop::option::of("[a-z ]{0,12}"),
        prop::option::of("[a-z]{1,6}"),
        prop::bool::ANY,
        prop::collection::btree_map(metric(), -1e3f64..1e3, 0..11),
    )
        .prop_map(move |(text, pseudo, has_ref, metrics)| {
            let mut r = UtteranceRecord::new(format!("u{i}"), format!("wav/u{i}.wav"));
            r.text = text;
            r.pseudo_text = pseudo;
            if has_ref {
                r.ref_audio = Some(format!("wav/u{i}_ref.wav").into());
            }
            r.metrics = metrics;
            r
        })
}

fn manifest() -> impl Strategy<Value = Vec<UtteranceRecord>> {
    (1usize..12).prop_flat_map(|n| (0..n).map(record).collect::<Vec<_>>())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn manifest_round_trip(records in manifest()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.jsonl");
        let records: Vec<UtteranceRecord> = records
            .into_iter()
            .map(|mut r| {
                r.audio = r.audio.map(|a| dir.path().join(a));
                r.ref_audio = r.ref_audio.map(|a| dir.path().join(a));
                r
            })
            .collect();
        let m = Manifest::new(records).unwrap();
        m.save(&path).unwrap();
        let loaded = Manifest::load(&path).unwrap();
        prop_assert_eq!(&loaded.records, &m.records);
        let again = dir.path().join("again.jsonl");
        loaded.save(&again).unwrap();
        prop_assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());
    }

    #[test]
    fn normalization_round_trip(m in metric(), y in -1e4f64..1e4, mean in -50f64..50.0, std in 1e-6f64..30.0) {
        let mut stats = BTreeMap::new();
        stats.insert(m, MetricStats { mean, std, count: 3 });
        let norm = NormalizationStats { stats };
        let back = norm.denormalize(m, norm.normalize(m, y).unwrap()).unwrap();
        prop_assert!((back - m.clamp(y)).abs() <= 1e-9 * m.clamp(y).abs().max(1.0));
    }

    #[test]
    fn si_snr_scale_invariant(seed in 0u64..1000, a in 0.01f64..100.0) {
        let n = 4000;
        let reference: Vec<f64> = (0..n).map(|i| ((i as f64) * 0.013 + seed as f64).sin()).collect();
        let est: Vec<f64> = reference
            .iter()
            .enumerate()
            .map(|(i, r)| r + 0.3 * ((i as f64) * 0.71 + seed as f64 * 3.0).cos())
            .collect();
        let r = Waveform::new(reference, 16000).unwrap();
        let e = Waveform::new(est.clone(), 16000).unwrap();
        let scaled = Waveform::new(est.iter().map(|v| v * a).collect(), 16000).unwrap();
        prop_assert!((si_snr(&e, &r).unwrap() - si_snr(&scaled, &r).unwrap()).abs() < 1e-6);
    }

    #[test]
    fn resampler_preserves_tone(freq in 100f64..3000.0, target in prop::sample::select(vec![8000u32, 10_000, 22_050, 44_100])) {
        let fs = 16_000u32;
        let n = 8000;
        let samples: Vec<f64> = (0..n).map(|i| (2.0 * std::f64::consts::PI * freq * i as f64 / fs as f64).sin()).collect();
        let out = resample(&Waveform::new(samples, fs).unwrap(), target).unwrap();
        prop_assert_eq!(out.len(), (n as f64 * target as f64 / fs as f64).round() as usize);
        // direct DFT over a window of whole bins
        let x = out.samples();
        let len = x.len();
        let bin_hz = target as f64 / len as f64;
        let power = |k: usize| {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, v) in x.iter().enumerate() {
                let ph = 2.0 * std::f64::consts::PI * k as f64 * t as f64 / len as f64;
                re += v * ph.cos();
                im -= v * ph.sin();
            }
            re * re + im * im
        };
        let expected = (freq / bin_hz).round() as usize;
        let lo = expected.saturating_sub(3);
        let peak = (lo..=expected + 3).max_by(|&a, &b| power(a).total_cmp(&power(b))).unwrap();
        prop_assert!((peak as f64 * bin_hz - freq).abs() <= bin_hz);
    }

    #[test]
    fn evaluate_is_order_independent(seed in 0u64..500) {
        let mut truth = Vec::new();
        let mut preds = Vec::new();
        for i in 0..15 {
            let v = ((i as u64 * 7919 + seed) % 97) as f64;
            let mut t = UtteranceRecord::new(format!("u{i}"), "a.wav");
            t.metrics.insert(Metric::Mos, 1.0 + v / 25.0);
            if i % 3 != 0 {
                t.metrics.insert(Metric::Wer, v / 97.0);
            }
            let mut p = t.clone();
            p.metrics.insert(Metric::Mos, 1.0 + ((v * 13.0) % 97.0) / 25.0);
            p.metrics.insert(Metric::Wer, ((v * 5.0) % 97.0) / 97.0);
            truth.push(t);
            preds.push(p);
        }
        let a = evaluate(&Manifest::new(preds.clone()).unwrap(), &Manifest::new(truth.clone()).unwrap()).unwrap();
        let rot = (seed % 15) as usize;
        preds.rotate_left(rot);
        truth.reverse();
        let b = evaluate(&Manifest::new(preds).unwrap(), &Manifest::new(truth).unwrap()).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn lr_schedule_monotone(a in 0usize..60_000, b in 0usize..60_000, warmup in 1usize..30_000) {
        let (lo, hi) = (a.min(b), a.max(b));
        prop_assert!(lr_schedule(lo, 1e-3, warmup) <= lr_schedule(hi, 1e-3, warmup));
        if lo >= warmup {
            prop_assert_eq!(lr_schedule(lo, 1e-3, warmup), lr_schedule(hi, 1e-3, warmup));
        }
    }

    #[test]
    fn pseudo_labels_within_range(snr in -40f64..80.0, f0 in 100f64..300.0) {
        for (m, v) in pseudo_labels(snr, f0) {
            let (lo, hi) = m.spec().range;
            prop_assert!(v >= lo && v <= hi, "{} {}", m, v);
        }
    }
}

#[test]
fn pseudo_labels_are_monotone_in_snr() {
    let at = |s: f64| pseudo_labels(s, 180.0);
    for w in [-10.0, 0.0, 10.0, 20.0, 30.0].windows(2) {
        for ((m, lo), (_, hi)) in at(w[0]).into_iter().zip(at(w[1])) {
            if m == Metric::Wer {
                assert!(hi < lo);
            } else {
                assert!(hi > lo, "{m}");
            }
        }
    }
}
