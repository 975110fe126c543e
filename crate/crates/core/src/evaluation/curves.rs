use std::io::Write;

use serde::{Deserialize, Serialize};

use super::metrics::binarize_label;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveVariant {
    Model,
    Optimal,
    Random,
    /// Cumulative label sum over labeling order.
    Progress,
}

impl CurveVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            CurveVariant::Model => "model",
            CurveVariant::Optimal => "optimal",
            CurveVariant::Random => "random",
            CurveVariant::Progress => "progress",
        }
    }
}

/// `(x, y)` points with strictly increasing `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub variant: CurveVariant,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallCurves {
    pub model: Curve,
    pub optimal: Curve,
    pub random: Curve,
}

/// Cumulative count of true positives found after examining the top-m
/// tickets, for m = 0..=n. Score ties are broken by ticket id.
pub fn cumulative_recall_curves(scores: &[f64], labels: &[f64], ids: &[&str]) -> Result<RecallCurves> {
    let n = scores.len();
    if n == 0 || labels.len() != n || ids.len() != n {
        return Err(Error::invalid("curves need equal-length, non-empty inputs"));
    }
    let truth: Vec<bool> = labels.iter().map(|&y| binarize_label(y)).collect();
    let total = truth.iter().filter(|t| **t).count();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then_with(|| ids[a].cmp(ids[b])));

    let mut model = vec![(0.0, 0.0)];
    let mut found = 0usize;
    for (m, &i) in order.iter().enumerate() {
        found += truth[i] as usize;
        model.push(((m + 1) as f64, found as f64));
    }
    let optimal = (0..=n).map(|m| (m as f64, m.min(total) as f64)).collect();
    let random = (0..=n)
        .map(|m| (m as f64, total as f64 * m as f64 / n as f64))
        .collect();
    Ok(RecallCurves {
        model: Curve {
            variant: CurveVariant::Model,
            points: model,
        },
        optimal: Curve {
            variant: CurveVariant::Optimal,
            points: optimal,
        },
        random: Curve {
            variant: CurveVariant::Random,
            points: random,
        },
    })
}

/// CSV with columns `variant,n_examined,n_td_found`.
pub fn write_curves_csv<W: Write>(curves: &[&Curve], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::invalid(format!("csv: {e}"));
    w.write_record(["variant", "n_examined", "n_td_found"]).map_err(err)?;
    for c in curves {
        for (x, y) in &c.points {
            w.write_record([c.variant.as_str(), &x.to_string(), &y.to_string()])
                .map_err(err)?;
        }
    }
    w.flush().map_err(|e| Error::invalid(format!("csv: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn five_ticket_enumeration() {
        // order by score: c(0.9,TD) a(0.8,no) e(0.5,TD) b(0.5,no) d(0.1,TD); e/b tie -> b first
        let ids = ["a", "b", "c", "d", "e"];
        let s = [0.8, 0.5, 0.9, 0.1, 0.5];
        let y = [0.0, 0.2, 1.0, 0.9, 0.7];
        let c = cumulative_recall_curves(&s, &y, &ids).unwrap();
        let ys: Vec<f64> = c.model.points.iter().map(|p| p.1).collect();
        assert_eq!(ys, vec![0.0, 1.0, 1.0, 1.0, 2.0, 3.0]);
        let opt: Vec<f64> = c.optimal.points.iter().map(|p| p.1).collect();
        assert_eq!(opt, vec![0.0, 1.0, 2.0, 3.0, 3.0, 3.0]);
        assert_eq!(c.random.points[5], (5.0, 3.0));
    }
}
