use crate::corpus::Ticket;
use crate::error::{Error, Result};
use crate::evaluation::BinaryMetrics;
use crate::features::{keyphrase_flags, KEY_PHRASES};

/// Says no ticket is technical debt.
pub fn baseline_no_td(_ticket: &Ticket) -> f64 {
    0.0
}

fn check_k(k: usize) -> Result<()> {
    if (1..=KEY_PHRASES.len()).contains(&k) {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "keyphrase prefix k = {k} outside 1..={}",
            KEY_PHRASES.len()
        )))
    }
}

/// 1 when any of the first `k` key phrases occurs in the text.
pub fn baseline_keyphrase(text: &str, k: usize) -> Result<f64> {
    check_k(k)?;
    Ok(keyphrase_prefix_score(&keyphrase_flags(text), k))
}

/// Same as [`baseline_keyphrase`] from precomputed key-phrase flags.
pub fn keyphrase_prefix_score(flags: &[f64], k: usize) -> f64 {
    if flags[..k].iter().any(|&f| f > 0.0) {
        1.0
    } else {
        0.0
    }
}

/// Picks the prefix length whose precision/recall ratio on the given tickets
/// is closest to `target_ratio`; ties go to the smaller `k`. Prefixes with
/// undefined precision or zero recall are skipped.
pub fn tune_keyphrase_k(flags: &[Vec<f64>], labels: &[f64], weights: &[f64], target_ratio: f64) -> Result<usize> {
    if !target_ratio.is_finite() || target_ratio <= 0.0 {
        return Err(Error::invalid(format!("target ratio {target_ratio} must be positive and finite")));
    }
    let mut best: Option<(f64, usize)> = None;
    for k in 1..=KEY_PHRASES.len() {
        let Some(ratio) = keyphrase_ratio(flags, labels, weights, k)? else {
            continue;
        };
        let dist = (ratio - target_ratio).abs();
        if best.is_none_or(|(d, _)| dist < d) {
            best = Some((dist, k));
        }
    }
    best.map(|(_, k)| k)
        .ok_or_else(|| Error::Undefined("no keyphrase prefix has defined precision and recall".into()))
}

/// Precision / recall of the `k`-prefix query, if both are defined and
/// recall is positive.
pub fn keyphrase_ratio(flags: &[Vec<f64>], labels: &[f64], weights: &[f64], k: usize) -> Result<Option<f64>> {
    check_k(k)?;
    let scores: Vec<f64> = flags.iter().map(|f| keyphrase_prefix_score(f, k)).collect();
    let m = BinaryMetrics::compute(&scores, labels, weights, 0.5)?;
    Ok(match (m.precision, m.recall) {
        (Some(p), Some(r)) if r > 0.0 => Some(p / r),
        _ => None,
    })
}

/// Precision / recall of thresholded scores, if defined.
pub fn precision_recall_ratio(scores: &[f64], labels: &[f64], weights: &[f64], threshold: f64) -> Result<Option<f64>> {
    let m = BinaryMetrics::compute(scores, labels, weights, threshold)?;
    Ok(match (m.precision, m.recall) {
        (Some(p), Some(r)) if r > 0.0 => Some(p / r),
        _ => None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prefix_rule() {
        assert_eq!(baseline_keyphrase("pay down the debt", 1).unwrap(), 1.0);
        assert_eq!(KEY_PHRASES[11], "deviate");
        assert_eq!(baseline_keyphrase("these deviate a lot", 12).unwrap(), 1.0);
        assert_eq!(baseline_keyphrase("just a tweak", 12).unwrap(), 0.0);
        assert_eq!(baseline_keyphrase("just a tweak", 13).unwrap(), 1.0);
        assert_eq!(baseline_keyphrase("", 25).unwrap(), 0.0);
        assert!(baseline_keyphrase("debt", 0).is_err());
        assert!(baseline_keyphrase("debt", 26).is_err());
    }

    #[test]
    fn tuning_matches_exhaustive_scan() {
        // ticket i carries phrase i % 25; the first five are all positives
        let flags: Vec<Vec<f64>> = (0..100)
            .map(|i| (0..25).map(|j| (j == i % 25) as u8 as f64).collect())
            .collect();
        let labels: Vec<f64> = (0..100).map(|i| if i % 25 < 5 || i % 7 == 0 { 1.0 } else { 0.0 }).collect();
        let w = vec![1.0; 100];
        for target in [0.05, 0.5, 1.0, 2.0, 50.0] {
            let k = tune_keyphrase_k(&flags, &labels, &w, target).unwrap();
            let dist = |k| (keyphrase_ratio(&flags, &labels, &w, k).unwrap().unwrap() - target).abs();
            for other in 1..=25 {
                assert!(dist(k) < dist(other) || (dist(k) == dist(other) && k <= other));
            }
        }
    }

    #[test]
    fn no_defined_prefix_is_an_error() {
        let flags = vec![vec![0.0; 25]; 4];
        assert!(tune_keyphrase_k(&flags, &[1.0, 0.0, 1.0, 0.0], &[1.0; 4], 1.0).is_err());
    }
}
