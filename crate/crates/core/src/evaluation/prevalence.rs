use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::bootstrap::bootstrap_ci;
use super::weights::{estimate_sampling_weights, MIN_SAMPLING_PROB};
use crate::error::{Error, Result};
use crate::gbm::{Schema, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrevalenceEstimate {
    /// Mean label over the labeled sample.
    pub naive_rate: f64,
    /// Inverse-probability-weighted mean label.
    pub corrected_rate: f64,
    /// `Σ p·y / Σ p`, kept for comparison; it weights oversampled tickets up.
    pub probability_weighted_rate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub n_labeled: usize,
    pub n_total: usize,
    pub replicates: usize,
    pub n_undefined: usize,
    /// Whether each replicate refit the inclusion regression.
    pub refit: bool,
}

fn check_probs(probs: &[f64]) -> Result<()> {
    match probs.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
        Some(p) => Err(Error::invalid(format!("inclusion probability {p} outside (0, 1]"))),
        None => Ok(()),
    }
}

/// `Σ(y/p) / Σ(1/p)` over the chosen positions.
pub fn ipw_rate(labels: &[f64], probs: &[f64]) -> f64 {
    let (num, den) = labels
        .iter()
        .zip(probs)
        .fold((0.0, 0.0), |(n, d), (y, p)| (n + y / p, d + 1.0 / p));
    num / den
}

pub fn probability_weighted_rate(labels: &[f64], probs: &[f64]) -> f64 {
    let (num, den) = labels
        .iter()
        .zip(probs)
        .fold((0.0, 0.0), |(n, d), (y, p)| (n + y * p, d + p));
    num / den
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Prevalence with inclusion probabilities held fixed across replicates.
pub fn estimate_prevalence(
    labels: &[f64],
    probs: &[f64],
    n_total: usize,
    replicates: usize,
    seed: u64,
) -> Result<PrevalenceEstimate> {
    if labels.is_empty() || labels.len() != probs.len() {
        return Err(Error::invalid("prevalence needs equal-length, non-empty labels and probabilities"));
    }
    check_probs(probs)?;
    if let Some(&y) = labels.iter().find(|y| !(0.0..=1.0).contains(*y)) {
        return Err(Error::LabelOutOfRange(y));
    }
    let corrected = ipw_rate(labels, probs);
    let ci = bootstrap_ci(labels.len(), replicates, seed, |idx| {
        let y: Vec<f64> = idx.iter().map(|&i| labels[i]).collect();
        let p: Vec<f64> = idx.iter().map(|&i| probs[i]).collect();
        Some(ipw_rate(&y, &p))
    })?
    .containing(corrected);
    Ok(PrevalenceEstimate {
        naive_rate: mean(labels),
        corrected_rate: corrected,
        probability_weighted_rate: probability_weighted_rate(labels, probs),
        ci_lo: ci.lo,
        ci_hi: ci.hi,
        n_labeled: labels.len(),
        n_total,
        replicates,
        n_undefined: ci.n_undefined,
        refit: false,
    })
}

/// Prevalence where every replicate resamples the labeled set and refits the
/// inclusion regression over all tickets. `labeled[k]` is the row index of
/// the k-th labeled ticket and `labels[k]` its label.
#[allow(clippy::too_many_arguments)]
pub fn estimate_prevalence_refit(
    all_rows: &[&[f64]],
    labeled: &[usize],
    labels: &[f64],
    schema: &Schema,
    config: &TrainConfig,
    replicates: usize,
    seed: u64,
) -> Result<PrevalenceEstimate> {
    if labeled.is_empty() || labeled.len() != labels.len() {
        return Err(Error::invalid("labeled rows and labels differ in length"));
    }
    let fit_probs = |members: &[usize]| -> Result<Vec<f64>> {
        let set: BTreeSet<usize> = members.iter().copied().collect();
        let included: Vec<bool> = (0..all_rows.len()).map(|i| set.contains(&i)).collect();
        let fit = estimate_sampling_weights(all_rows, &included, schema, config)?;
        Ok(members
            .iter()
            .map(|&i| fit.probs[i].clamp(MIN_SAMPLING_PROB, 1.0))
            .collect())
    };
    let probs = fit_probs(labeled)?;
    let corrected = ipw_rate(labels, &probs);
    let ci = bootstrap_ci(labels.len(), replicates, seed, |idx| {
        let members: Vec<usize> = idx.iter().map(|&k| labeled[k]).collect();
        let y: Vec<f64> = idx.iter().map(|&k| labels[k]).collect();
        fit_probs(&members).ok().map(|p| ipw_rate(&y, &p))
    })?
    .containing(corrected);
    Ok(PrevalenceEstimate {
        naive_rate: mean(labels),
        corrected_rate: corrected,
        probability_weighted_rate: probability_weighted_rate(labels, &probs),
        ci_lo: ci.lo,
        ci_hi: ci.hi,
        n_labeled: labels.len(),
        n_total: all_rows.len(),
        replicates,
        n_undefined: ci.n_undefined,
        refit: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_probabilities_cancel() {
        let y = [0.0, 1.0, 0.8, 0.1, 0.3];
        let est = estimate_prevalence(&y, &[0.2; 5], 25, 50, 1).unwrap();
        assert!((est.corrected_rate - est.naive_rate).abs() < 1e-15);
        assert!(est.ci_lo <= est.corrected_rate && est.corrected_rate <= est.ci_hi);
    }

    #[test]
    fn non_positive_probability_rejected() {
        assert!(estimate_prevalence(&[1.0], &[0.0], 1, 10, 1).is_err());
    }
}
