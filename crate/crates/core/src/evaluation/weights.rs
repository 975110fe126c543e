use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gbm::{train, GbmModel, Schema, TrainConfig};

/// Lowest sampling probability used when inverting; caps w1 at 1000.
pub const MIN_SAMPLING_PROB: f64 = 1e-3;

/// `(0.5 - y)^2`: zero for a maximally unsure label, 0.25 for a sure one.
pub fn label_uncertainty_weight(y: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&y) {
        return Err(Error::LabelOutOfRange(y));
    }
    Ok((0.5 - y) * (0.5 - y))
}

/// Per-ticket evaluation weights; `w[i] == w1[i] * w2[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalWeights {
    pub w1: Vec<f64>,
    pub w2: Vec<f64>,
    pub w: Vec<f64>,
}

impl EvalWeights {
    pub fn new(w1: Vec<f64>, labels: &[f64]) -> Result<Self> {
        if w1.len() != labels.len() {
            return Err(Error::invalid("sampling weights and labels differ in length"));
        }
        if let Some(x) = w1.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
            return Err(Error::invalid(format!("sampling weight {x} is invalid")));
        }
        let w2 = labels
            .iter()
            .map(|&y| label_uncertainty_weight(y))
            .collect::<Result<Vec<_>>>()?;
        let w = w1.iter().zip(&w2).map(|(a, b)| a * b).collect();
        Ok(EvalWeights { w1, w2, w })
    }
}

/// The inclusion-probability regression and what it implies.
#[derive(Debug, Clone)]
pub struct SamplingFit {
    pub model: GbmModel,
    /// Fitted inclusion probability for every row.
    pub probs: Vec<f64>,
    /// `1 / clamp(p, 1e-3, 1)` for every row; only meaningful for included rows.
    pub w1: Vec<f64>,
}

impl SamplingFit {
    pub fn w1_of(&self, included: &[bool]) -> Vec<f64> {
        self.w1
            .iter()
            .zip(included)
            .filter(|(_, inc)| **inc)
            .map(|(w, _)| *w)
            .collect()
    }
}

pub fn sampling_weight(p: f64) -> f64 {
    1.0 / p.clamp(MIN_SAMPLING_PROB, 1.0)
}

/// Regresses inclusion in the labeled set on the features of every ticket
/// with the boosted-tree model, and inverts the fitted rates.
pub fn estimate_sampling_weights(
    rows: &[&[f64]],
    included: &[bool],
    schema: &Schema,
    config: &TrainConfig,
) -> Result<SamplingFit> {
    if rows.len() != included.len() {
        return Err(Error::invalid("inclusion flags and rows differ in length"));
    }
    let n_in = included.iter().filter(|b| **b).count();
    if n_in == 0 || n_in == included.len() {
        return Err(Error::invalid(
            "sampling-rate regression needs both included and excluded tickets",
        ));
    }
    let y: Vec<f64> = included.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    let model = train(rows, &y, schema, config)?;
    let probs: Vec<f64> = rows.iter().map(|r| model.predict_proba(r)).collect();
    let w1 = probs.iter().map(|&p| sampling_weight(p)).collect();
    Ok(SamplingFit { model, probs, w1 })
}
