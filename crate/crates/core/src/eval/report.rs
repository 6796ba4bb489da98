use std::fmt::Write as _;

use super::{pearson_lcc, spearman_srcc};
use crate::error::{Error, Result};
use crate::manifest::Manifest;
use crate::metrics::{Domain, Metric};

#[derive(Debug, Clone, PartialEq)]
pub struct MetricScore {
    pub metric: Metric,
    /// Utterances carrying both a prediction and a ground-truth value.
    pub n: usize,
    /// `None` when the correlation is undefined (constant column).
    pub lcc: Option<f64>,
    pub srcc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub scores: Vec<MetricScore>,
}

fn mean_defined(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let defined: Vec<f64> = values.flatten().collect();
    (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64)
}

fn fmt_opt(v: Option<f64>, precision: usize) -> String {
    match v {
        Some(v) => format!("{v:.precision$}"),
        None => "undefined".into(),
    }
}

impl EvaluationReport {
    pub fn get(&self, metric: Metric) -> Option<&MetricScore> {
        self.scores.iter().find(|s| s.metric == metric)
    }

    /// Unweighted mean LCC over metrics where it is defined.
    pub fn average_lcc(&self) -> Option<f64> {
        mean_defined(self.scores.iter().map(|s| s.lcc))
    }

    pub fn average_srcc(&self) -> Option<f64> {
        mean_defined(self.scores.iter().map(|s| s.srcc))
    }

    /// Machine-readable rows: `metric<TAB>lcc<TAB>srcc<TAB>n`, with an
    /// `avg` row last.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("metric\tlcc\tsrcc\tn\n");
        let full = |v: Option<f64>| v.map_or_else(|| "undefined".to_string(), |v| format!("{v:e}"));
        for s in &self.scores {
            let _ = writeln!(out, "{}\t{}\t{}\t{}", s.metric, full(s.lcc), full(s.srcc), s.n);
        }
        let _ = writeln!(
            out,
            "avg\t{}\t{}\t{}",
            full(self.average_lcc()),
            full(self.average_srcc()),
            self.scores.len()
        );
        out
    }

    /// Table grouped by domain, four decimals.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<25} {:<8} {:>9} {:>9} {:>6}",
            "domain", "metric", "LCC", "SRCC", "n"
        );
        let domains = [
            Domain::NoiseLevel,
            Domain::Prosody,
            Domain::Naturalness,
            Domain::Intelligibility,
            Domain::Speaker,
        ];
        for domain in domains {
            for s in self.scores.iter().filter(|s| s.metric.spec().domain == domain) {
                let _ = writeln!(
                    out,
                    "{:<25} {:<8} {:>9} {:>9} {:>6}",
                    domain.label(),
                    s.metric.id(),
                    fmt_opt(s.lcc, 4),
                    fmt_opt(s.srcc, 4),
                    s.n
                );
            }
        }
        let _ = writeln!(
            out,
            "{:<25} {:<8} {:>9} {:>9}",
            "",
            "Avg.",
            fmt_opt(self.average_lcc(), 4),
            fmt_opt(self.average_srcc(), 4)
        );
        out
    }
}

/// Pairs predictions with ground truth by utterance id and scores every
/// metric that has at least two pairs.
pub fn evaluate(predictions: &Manifest, truth: &Manifest) -> Result<EvaluationReport> {
    let preds = predictions.by_id();
    let mut truth_rows: Vec<_> = truth.records.iter().collect();
    truth_rows.sort_by(|a, b| a.id.cmp(&b.id));
    let mut scores = Vec::new();
    for metric in Metric::ALL {
        let (p, t): (Vec<f64>, Vec<f64>) = truth_rows
            .iter()
            .filter_map(|row| {
                let truth_value = row.label(metric)?;
                let pred_value = preds.get(row.id.as_str())?.label(metric)?;
                Some((pred_value, truth_value))
            })
            .unzip();
        if p.len() < 2 {
            continue;
        }
        scores.push(MetricScore {
            metric,
            n: p.len(),
            lcc: pearson_lcc(&p, &t)?,
            srcc: spearman_srcc(&p, &t)?,
        });
    }
    if scores.is_empty() {
        return Err(Error::invalid(
            "no metric has at least two utterances with both prediction and ground truth",
        ));
    }
    Ok(EvaluationReport { scores })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifest::UtteranceRecord;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn manifest(rows: Vec<(String, Vec<(Metric, f64)>)>) -> Manifest {
        Manifest::new(
            rows.into_iter()
                .map(|(id, m)| {
                    let mut r = UtteranceRecord::new(id.clone(), format!("{id}.wav"));
                    r.metrics = m.into_iter().collect();
                    r
                })
                .collect(),
        )
        .unwrap()
    }

    fn random_truth(n: usize, seed: u64) -> Manifest {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        manifest(
            (0..n)
                .map(|i| {
                    let mut m = vec![(Metric::Mos, rng.random_range(1.0..5.0))];
                    m.push((Metric::Stoi, rng.random_range(0.0..1.0)));
                    if i % 10 == 0 {
                        m.push((Metric::Pesq, rng.random_range(1.0..4.5)));
                    }
                    m.push((Metric::Wer, 0.5));
                    (format!("u{i:03}"), m)
                })
                .collect(),
        )
    }

    #[test]
    fn perfect_predictions() {
        let truth = random_truth(100, 1);
        let report = evaluate(&truth, &truth).unwrap();
        assert_eq!(report.get(Metric::Pesq).unwrap().n, 10);
        for s in &report.scores {
            if s.metric == Metric::Wer {
                assert_eq!((s.lcc, s.srcc), (None, None));
            } else {
                assert!((s.lcc.unwrap() - 1.0).abs() < 1e-12);
                assert!((s.srcc.unwrap() - 1.0).abs() < 1e-12);
            }
        }
        // constant WER column is excluded from the average
        assert!((report.average_lcc().unwrap() - 1.0).abs() < 1e-12);
        assert!(report.to_tsv().contains("wer\tundefined\tundefined\t100"));
        assert!(report.to_table().contains("Avg."));
    }

    #[test]
    fn order_independent() {
        let truth = random_truth(60, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut preds = truth.clone();
        for r in &mut preds.records {
            for v in r.metrics.values_mut() {
                *v += rng.random_range(-0.3..0.3);
            }
        }
        let a = evaluate(&preds, &truth).unwrap();
        let mut shuffled = truth.clone();
        shuffled.records.shuffle(&mut rng);
        preds.records.shuffle(&mut rng);
        assert_eq!(a, evaluate(&preds, &shuffled).unwrap());
    }

    #[test]
    fn no_pairs_is_an_error() {
        let truth = manifest(vec![("a".into(), vec![(Metric::Mos, 1.0)])]);
        assert!(evaluate(&truth, &truth).is_err());
    }
}
