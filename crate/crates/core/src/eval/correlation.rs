use crate::error::{Error, Result};

fn check_lengths(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!(
            "correlation inputs differ in length: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    Ok(())
}

/// Pearson correlation. `Ok(None)` when fewer than two points are given or
/// either input is constant.
pub fn pearson_lcc(x: &[f64], y: &[f64]) -> Result<Option<f64>> {
    check_lengths(x, y)?;
    let n = x.len();
    if n < 2 {
        return Ok(None);
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(None);
    }
    Ok(Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)))
}

/// 1-based ranks; tied values share the mean of the positions they occupy.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman correlation: Pearson over average ranks.
pub fn spearman_srcc(x: &[f64], y: &[f64]) -> Result<Option<f64>> {
    check_lengths(x, y)?;
    pearson_lcc(&average_ranks(x), &average_ranks(y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pearson_examples() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        assert!((pearson_lcc(&x, &y).unwrap().unwrap() - 1.0).abs() < 1e-12);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson_lcc(&x, &neg).unwrap().unwrap() + 1.0).abs() < 1e-12);
        // means 2.5, deviations (-1.5,-.5,.5,1.5) vs (-.5,-1.5,1.5,.5): 3/5
        let v = pearson_lcc(&x, &[2.0, 1.0, 4.0, 3.0]).unwrap().unwrap();
        assert!((v - 0.6).abs() < 1e-9);
    }

    #[test]
    fn undefined_cases() {
        assert_eq!(pearson_lcc(&[1.0, 2.0], &[3.0, 3.0]).unwrap(), None);
        assert_eq!(pearson_lcc(&[1.0], &[3.0]).unwrap(), None);
        assert_eq!(spearman_srcc(&[5.0; 4], &[1.0, 2.0, 3.0, 4.0]).unwrap(), None);
        assert!(pearson_lcc(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn tie_ranks() {
        assert_eq!(average_ranks(&[1.0, 2.0, 2.0, 3.0]), vec![1.0, 2.5, 2.5, 4.0]);
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 3.0]), vec![3.0, 1.0, 3.0, 3.0]);
    }

    #[test]
    fn spearman_monotone_map() {
        let x: Vec<f64> = (0..20).map(|i| i as f64 * 0.7 - 5.0).collect();
        let y: Vec<f64> = x.iter().map(|v| v.powi(3)).collect();
        assert_eq!(spearman_srcc(&x, &y).unwrap(), Some(1.0));
    }

    proptest! {
        #[test]
        fn srcc_invariant_under_increasing_transform(
            x in prop::collection::vec(-100.0f64..100.0, 3..40),
            y in prop::collection::vec(-100.0f64..100.0, 3..40),
        ) {
            let n = x.len().min(y.len());
            let (x, y) = (&x[..n], &y[..n]);
            let tx: Vec<f64> = x.iter().map(|v| v.exp().ln_1p() + 3.0 * v).collect();
            prop_assert_eq!(spearman_srcc(x, y).unwrap(), spearman_srcc(&tx, y).unwrap());
            prop_assert_eq!(spearman_srcc(x, y).unwrap(), spearman_srcc(y, x).unwrap());
        }

        #[test]
        fn lcc_affine_invariant_and_symmetric(
            x in prop::collection::vec(-10.0f64..10.0, 3..40),
            y in prop::collection::vec(-10.0f64..10.0, 3..40),
            a in 0.1f64..50.0,
            b in -20.0f64..20.0,
        ) {
            let n = x.len().min(y.len());
            let (x, y) = (&x[..n], &y[..n]);
            let ax: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            match (pearson_lcc(x, y).unwrap(), pearson_lcc(&ax, y).unwrap()) {
                (Some(p), Some(q)) => {
                    prop_assert!((p - q).abs() < 1e-12);
                    let r = pearson_lcc(y, x).unwrap().unwrap();
                    prop_assert!((p - r).abs() < 1e-15);
                }
                (None, None) => {}
                other => prop_assert!(false, "definedness changed: {:?}", other),
            }
        }
    }
}
