use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Expert labels count as positive strictly above one half.
pub fn binarize_label(y: f64) -> bool {
    y > 0.5
}

/// Scores count as a positive prediction at or above the threshold.
pub fn binarize_score(p: f64, threshold: f64) -> bool {
    p >= threshold
}

fn check(scores: &[f64], labels: &[f64], weights: &[f64]) -> Result<()> {
    if scores.len() != labels.len() || scores.len() != weights.len() {
        return Err(Error::invalid("scores, labels and weights differ in length"));
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(Error::invalid(format!("weight {w} is negative or not finite")));
    }
    Ok(())
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den > 0.0).then(|| num / den)
}

/// Weighted confusion-matrix ratios; `None` where the denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinaryMetrics {
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

impl BinaryMetrics {
    pub fn compute(scores: &[f64], labels: &[f64], weights: &[f64], threshold: f64) -> Result<Self> {
        check(scores, labels, weights)?;
        let (mut total, mut correct, mut tp, mut pred_pos, mut actual_pos) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for ((&s, &y), &w) in scores.iter().zip(labels).zip(weights) {
            let p = binarize_score(s, threshold);
            let t = binarize_label(y);
            total += w;
            if p == t {
                correct += w;
            }
            if p {
                pred_pos += w;
            }
            if t {
                actual_pos += w;
            }
            if p && t {
                tp += w;
            }
        }
        Ok(BinaryMetrics {
            accuracy: ratio(correct, total),
            precision: ratio(tp, pred_pos),
            recall: ratio(tp, actual_pos),
        })
    }
}

pub fn weighted_accuracy(scores: &[f64], labels: &[f64], weights: &[f64], threshold: f64) -> Result<Option<f64>> {
    Ok(BinaryMetrics::compute(scores, labels, weights, threshold)?.accuracy)
}

pub fn weighted_precision(scores: &[f64], labels: &[f64], weights: &[f64], threshold: f64) -> Result<Option<f64>> {
    Ok(BinaryMetrics::compute(scores, labels, weights, threshold)?.precision)
}

pub fn weighted_recall(scores: &[f64], labels: &[f64], weights: &[f64], threshold: f64) -> Result<Option<f64>> {
    Ok(BinaryMetrics::compute(scores, labels, weights, threshold)?.recall)
}

/// Weighted probability that a random positive outscores a random negative
/// (ties count half), via one sort and a sweep over tie groups.
pub fn weighted_auroc(scores: &[f64], labels: &[f64], weights: &[f64]) -> Result<f64> {
    check(scores, labels, weights)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let (mut neg_below, mut pos_total, mut neg_total, mut num) = (0.0, 0.0, 0.0, 0.0);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (mut p, mut n) = (0.0, 0.0);
        while i < order.len() && scores[order[i]] == s {
            let k = order[i];
            if binarize_label(labels[k]) {
                p += weights[k];
            } else {
                n += weights[k];
            }
            i += 1;
        }
        num += p * (neg_below + 0.5 * n);
        neg_below += n;
        pos_total += p;
        neg_total += n;
    }
    if pos_total <= 0.0 || neg_total <= 0.0 {
        return Err(Error::Undefined(
            "AUROC needs positive weight on both classes (labels > 0.5 and <= 0.5)".into(),
        ));
    }
    Ok(num / (pos_total * neg_total))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_counted_metrics() {
        let s = [1.0, 1.0, 0.0];
        let y = [1.0, 0.0, 0.0];
        let m = BinaryMetrics::compute(&s, &y, &[1.0; 3], 0.5).unwrap();
        assert_eq!(m.precision, Some(0.5));
        assert_eq!(m.recall, Some(1.0));
        assert!((m.accuracy.unwrap() - 2.0 / 3.0).abs() < 1e-15);
        let m = BinaryMetrics::compute(&s, &y, &[2.0, 1.0, 1.0], 0.5).unwrap();
        assert!((m.precision.unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.recall, Some(1.0));
        let none = BinaryMetrics::compute(&[0.0; 3], &y, &[1.0; 3], 0.5).unwrap();
        assert_eq!(none.precision, None);
        assert!(BinaryMetrics::compute(&s, &y, &[1.0, -1.0, 1.0], 0.5).is_err());
    }

    #[test]
    fn auroc_edges() {
        let y = [0.0, 0.0, 1.0, 1.0];
        assert_eq!(weighted_auroc(&[0.1, 0.2, 0.3, 0.4], &y, &[1.0; 4]).unwrap(), 1.0);
        assert_eq!(weighted_auroc(&[0.3; 4], &y, &[1.0; 4]).unwrap(), 0.5);
        assert!(matches!(
            weighted_auroc(&[0.1, 0.2], &[1.0, 0.9], &[1.0; 2]),
            Err(Error::Undefined(_))
        ));
    }
}
