//! Correlate predictions with ground truth and print both report forms.
//!
//! cargo run --example evaluate_report

use universa::eval::{average_ranks, evaluate, pearson_lcc, spearman_srcc};
use universa::{Manifest, Metric, UtteranceRecord};

fn main() -> universa::Result<()> {
    let x = [1.0, 2.0, 3.0, 4.0];
    let y = [2.0, 1.0, 4.0, 3.0];
    println!("lcc {:?}, srcc {:?}", pearson_lcc(&x, &y)?, spearman_srcc(&x, &y)?);
    println!("ranks of [1, 2, 2, 3]: {:?}", average_ranks(&[1.0, 2.0, 2.0, 3.0]));

    let mut truth = Vec::new();
    let mut predicted = Vec::new();
    for i in 0..20 {
        let q = 1.0 + 0.2 * i as f64;
        let mut t = UtteranceRecord::new(format!("u{i}"), format!("u{i}.wav"));
        t.metrics.insert(Metric::Mos, q);
        t.metrics.insert(Metric::Pesq, 1.0 + 0.15 * i as f64);
        // a constant column has no correlation
        t.metrics.insert(Metric::Stoi, 0.9);
        let mut p = t.clone();
        p.metrics.insert(Metric::Mos, q + 0.3 * ((i * 7) % 5) as f64);
        p.metrics.insert(Metric::Pesq, 4.5 - 0.1 * i as f64);
        truth.push(t);
        predicted.push(p);
    }
    let report = evaluate(&Manifest::new(predicted)?, &Manifest::new(truth)?)?;
    print!("{}", report.to_table());
    print!("{}", report.to_tsv());
    Ok(())
}
