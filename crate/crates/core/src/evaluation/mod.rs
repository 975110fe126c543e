//! Evaluation under biased label sampling.
//!
//! Labeled tickets were not drawn uniformly, so every metric takes per-ticket
//! weights: `w1` undoes the sampling rate, `w2` discounts uncertain labels.
//! With all weights equal every metric reduces to its textbook form.

mod bootstrap;
mod curves;
mod metrics;
mod prevalence;
mod weights;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bootstrap::{bootstrap_ci, resample, BootstrapCi, DEFAULT_REPLICATES};
pub use curves::{cumulative_recall_curves, write_curves_csv, Curve, CurveVariant, RecallCurves};
pub use metrics::{
    binarize_label, binarize_score, weighted_accuracy, weighted_auroc, weighted_precision,
    weighted_recall, BinaryMetrics,
};
pub use prevalence::{
    estimate_prevalence, estimate_prevalence_refit, ipw_rate, probability_weighted_rate,
    PrevalenceEstimate,
};
pub use weights::{
    estimate_sampling_weights, label_uncertainty_weight, sampling_weight, EvalWeights, SamplingFit,
    MIN_SAMPLING_PROB,
};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// A point estimate with an optional 95% interval that contains it.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Estimate {
    pub value: Option<f64>,
    pub ci: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub accuracy: Estimate,
    pub precision: Estimate,
    pub recall: Estimate,
    pub auroc: Estimate,
    pub threshold: f64,
    pub weighted: bool,
}

/// The four metrics at once; AUROC is absent when a class has no weight.
fn point_metrics(scores: &[f64], labels: &[f64], weights: &[f64], threshold: f64) -> Result<[Option<f64>; 4]> {
    let b = BinaryMetrics::compute(scores, labels, weights, threshold)?;
    let auroc = match weighted_auroc(scores, labels, weights) {
        Ok(a) => Some(a),
        Err(Error::Undefined(_)) => None,
        Err(e) => return Err(e),
    };
    Ok([b.accuracy, b.precision, b.recall, auroc])
}

fn pick<T: Copy>(xs: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| xs[i]).collect()
}

impl MetricReport {
    /// Point estimates only.
    pub fn compute(scores: &[f64], labels: &[f64], weights: &[f64], threshold: f64, weighted: bool) -> Result<Self> {
        let [a, p, r, u] = point_metrics(scores, labels, weights, threshold)?;
        let est = |value| Estimate { value, ci: None };
        Ok(MetricReport {
            accuracy: est(a),
            precision: est(p),
            recall: est(r),
            auroc: est(u),
            threshold,
            weighted,
        })
    }

    /// Point estimates plus percentile-bootstrap intervals (weights held
    /// fixed per ticket). A metric whose replicates are mostly undefined
    /// keeps its point value and gets no interval.
    pub fn with_bootstrap(
        scores: &[f64],
        labels: &[f64],
        weights: &[f64],
        threshold: f64,
        weighted: bool,
        replicates: usize,
        seed: u64,
    ) -> Result<Self> {
        let mut report = Self::compute(scores, labels, weights, threshold, weighted)?;
        let slots = [
            &mut report.accuracy,
            &mut report.precision,
            &mut report.recall,
            &mut report.auroc,
        ];
        for (k, slot) in slots.into_iter().enumerate() {
            let Some(point) = slot.value else { continue };
            let ci = bootstrap_ci(scores.len(), replicates, seed, |idx| {
                point_metrics(&pick(scores, idx), &pick(labels, idx), &pick(weights, idx), threshold)
                    .ok()
                    .and_then(|m| m[k])
            });
            match ci {
                Ok(ci) => {
                    let ci = ci.containing(point);
                    slot.ci = Some((ci.lo, ci.hi));
                }
                Err(Error::Undefined(msg)) => log::warn!("no interval: {msg}"),
                Err(e) => return Err(e),
            }
        }
        Ok(report)
    }
}

/// Interval for the improvement `main - baseline` of each metric, from
/// paired resamples of the same tickets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImprovementCi {
    pub accuracy: Option<(f64, f64)>,
    pub precision: Option<(f64, f64)>,
    pub recall: Option<(f64, f64)>,
    pub auroc: Option<(f64, f64)>,
}

pub fn improvement_ci(
    main: &[f64],
    baseline: &[f64],
    labels: &[f64],
    weights: &[f64],
    threshold: f64,
    replicates: usize,
    seed: u64,
) -> Result<ImprovementCi> {
    let mut out = [None; 4];
    for (k, slot) in out.iter_mut().enumerate() {
        let ci = bootstrap_ci(labels.len(), replicates, seed, |idx| {
            let y = pick(labels, idx);
            let w = pick(weights, idx);
            let a = point_metrics(&pick(main, idx), &y, &w, threshold).ok()?[k]?;
            let b = point_metrics(&pick(baseline, idx), &y, &w, threshold).ok()?[k]?;
            Some(a - b)
        });
        match ci {
            Ok(ci) => *slot = Some((ci.lo, ci.hi)),
            Err(Error::Undefined(msg)) => log::warn!("no improvement interval: {msg}"),
            Err(e) => return Err(e),
        }
    }
    let [accuracy, precision, recall, auroc] = out;
    Ok(ImprovementCi {
        accuracy,
        precision,
        recall,
        auroc,
    })
}

/// Seeded partition of `0..n` into `k` disjoint folds whose sizes differ by
/// at most one.
pub fn kfold(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::invalid("cross-validation needs k >= 2"));
    }
    if n < k {
        return Err(Error::invalid(format!("{n} tickets cannot fill {k} folds")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = vec![Vec::with_capacity(n / k + 1); k];
    for (pos, i) in idx.into_iter().enumerate() {
        folds[pos % k].push(i);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: Vec<MetricReport>,
    pub mean: MetricReport,
}

fn mean_defined(xs: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = xs.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Runs `fold_eval(train, test)` on each of `k` folds and averages the
/// metrics that are defined.
pub fn cross_validate<F>(n: usize, k: usize, seed: u64, mut fold_eval: F) -> Result<CvReport>
where
    F: FnMut(&[usize], &[usize]) -> Result<MetricReport>,
{
    let folds = kfold(n, k, seed)?;
    let mut reports = Vec::with_capacity(k);
    for (i, test) in folds.iter().enumerate() {
        let train: Vec<usize> = folds
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .flat_map(|(_, f)| f.iter().copied())
            .collect();
        reports.push(fold_eval(&train, test)?);
    }
    let avg = |f: fn(&MetricReport) -> Option<f64>| Estimate {
        value: mean_defined(reports.iter().map(f)),
        ci: None,
    };
    let mean = MetricReport {
        accuracy: avg(|r| r.accuracy.value),
        precision: avg(|r| r.precision.value),
        recall: avg(|r| r.recall.value),
        auroc: avg(|r| r.auroc.value),
        threshold: reports.first().map_or(DEFAULT_THRESHOLD, |r| r.threshold),
        weighted: reports.first().is_some_and(|r| r.weighted),
    };
    Ok(CvReport { folds: reports, mean })
}
