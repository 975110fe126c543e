use std::collections::BTreeSet;

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::ActiveLearning;
use crate::corpus::synthetic::{simulated_label, GroundTruth};
use crate::corpus::{LabelRecord, RubricPath};
use crate::error::{Error, Result};
use crate::evaluation::{Curve, CurveVariant};
use crate::features::FeatureMatrix;
use crate::gbm::{train, Schema, TrainConfig};

/// Rater name on labels produced by [`simulate_active_learning`].
pub const SIMULATED_RATER: &str = "simulated";

/// Weighted sampling without replacement (exponential keys): each candidate
/// gets weight `max(p, floor)` and key `ln(u) / weight`; the `n` largest keys
/// win. The candidates are visited in id order, so the result does not
/// depend on how the pool is ordered.
pub fn sample_next_batch(pool: &[(&str, f64)], n: usize, floor: f64, seed: u64) -> Result<Vec<String>> {
    if pool.is_empty() {
        return Err(Error::invalid("no unlabeled tickets left to sample"));
    }
    if !(floor > 0.0 && floor <= 1.0) {
        return Err(Error::invalid(format!("floor {floor} outside (0, 1]")));
    }
    if n > pool.len() {
        return Err(Error::invalid(format!(
            "batch of {n} requested from a pool of {}",
            pool.len()
        )));
    }
    let mut sorted: Vec<(&str, f64)> = pool.to_vec();
    sorted.sort_by(|a, b| a.0.cmp(b.0));
    if sorted.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(Error::invalid("duplicate ticket in sampling pool"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keyed: Vec<(f64, &str)> = sorted
        .iter()
        .map(|&(id, p)| {
            let w = if p.is_finite() { p.max(floor) } else { floor };
            // 1 - u lies in (0, 1], so the log is finite
            let u: f64 = 1.0 - rng.random::<f64>();
            (u.ln() / w, id)
        })
        .collect();
    keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
    Ok(keyed.into_iter().take(n).map(|(_, id)| id.to_string()).collect())
}

/// `(i, y_1 + ... + y_i)` for labels in labeling order.
pub fn label_progress_curve(labels: &[f64]) -> Curve {
    let mut sum = 0.0;
    let points = labels
        .iter()
        .enumerate()
        .map(|(i, y)| {
            sum += y;
            ((i + 1) as f64, sum)
        })
        .collect();
    Curve {
        variant: CurveVariant::Progress,
        points,
    }
}

/// Fixed start of the simulated labeling clock.
fn simulation_epoch() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2020, 1, 6, 9, 0, 0).unwrap()
}

/// Replays the labeling loop against known ground truth: a uniform first
/// batch, then batches drawn with [`sample_next_batch`] from the predictions
/// of a model retrained on everything labeled so far. Labels come from
/// [`simulated_label`]; timestamps advance one minute per label.
pub fn simulate_active_learning(
    matrix: &FeatureMatrix,
    truth: &GroundTruth,
    settings: &ActiveLearning,
    train_config: &TrainConfig,
    seed: u64,
) -> Result<Vec<LabelRecord>> {
    let target = settings.target_labels.min(matrix.n_rows());
    let schema = Schema::of(matrix);
    let mut label_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labeled: BTreeSet<usize> = BTreeSet::new();
    let mut records = Vec::with_capacity(target);
    let mut round = 0u64;
    let epoch = simulation_epoch();

    while records.len() < target {
        let pool_idx: Vec<usize> = (0..matrix.n_rows()).filter(|i| !labeled.contains(i)).collect();
        let first = records.is_empty();
        let size = if first { settings.initial_batch } else { settings.batch_size };
        let size = size.min(target - records.len());
        let probs: Vec<f64> = if first || labeled.len() < 2 * train_config.min_data_in_leaf {
            vec![1.0; pool_idx.len()]
        } else {
            let rows: Vec<&[f64]> = labeled.iter().map(|&i| matrix.rows[i].as_slice()).collect();
            let y: Vec<f64> = labeled
                .iter()
                .map(|&i| label_of(&records, &matrix.ids[i]))
                .collect();
            let model = train(&rows, &y, &schema, train_config)?;
            pool_idx.iter().map(|&i| model.predict_proba(&matrix.rows[i])).collect()
        };
        let pool: Vec<(&str, f64)> = pool_idx
            .iter()
            .zip(&probs)
            .map(|(&i, &p)| (matrix.ids[i].as_str(), p))
            .collect();
        let batch = sample_next_batch(&pool, size, settings.floor, seed.wrapping_add(1 + round))?;
        round += 1;
        for id in batch {
            let t = *truth
                .get(&id)
                .ok_or_else(|| Error::invalid(format!("no ground truth for ticket {id}")))?;
            let i = matrix.ids.binary_search(&id).map_err(|_| Error::UnknownTicket(id.clone()))?;
            labeled.insert(i);
            records.push(LabelRecord {
                ticket_id: id,
                label: simulated_label(&mut label_rng, t),
                rater: SIMULATED_RATER.into(),
                labeled_at: epoch + Duration::minutes(records.len() as i64),
                rubric_path: RubricPath::default(),
                notes: None,
            });
        }
    }
    Ok(records)
}

/// `n` tickets drawn uniformly and labeled by the simulated rater, in
/// labeling order.
pub fn simulate_uniform_labels(truth: &GroundTruth, n: usize, seed: u64) -> Result<Vec<LabelRecord>> {
    let pool: Vec<(&str, f64)> = truth.keys().map(|id| (id.as_str(), 1.0)).collect();
    let batch = sample_next_batch(&pool, n, 1.0, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let epoch = simulation_epoch();
    Ok(batch
        .into_iter()
        .enumerate()
        .map(|(i, id)| LabelRecord {
            label: simulated_label(&mut rng, truth[&id]),
            ticket_id: id,
            rater: SIMULATED_RATER.into(),
            labeled_at: epoch + Duration::minutes(i as i64),
            rubric_path: RubricPath::default(),
            notes: None,
        })
        .collect())
}

fn label_of(records: &[LabelRecord], id: &str) -> f64 {
    records
        .iter()
        .rev()
        .find(|r| r.ticket_id == id)
        .map_or(0.0, |r| r.label)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn progress_curve_examples() {
        let c = label_progress_curve(&[1.0, 0.0, 0.5]);
        assert_eq!(c.points, vec![(1.0, 1.0), (2.0, 1.0), (3.0, 1.5)]);
        assert!(label_progress_curve(&[]).points.is_empty());
    }

    #[test]
    fn batch_is_distinct_seeded_and_order_free() {
        let ids: Vec<String> = (0..50).map(|i| format!("t{i:02}")).collect();
        let pool: Vec<(&str, f64)> = ids.iter().map(|s| (s.as_str(), 0.3)).collect();
        let a = sample_next_batch(&pool, 10, 0.05, 9).unwrap();
        let mut rev = pool.clone();
        rev.reverse();
        assert_eq!(a, sample_next_batch(&rev, 10, 0.05, 9).unwrap());
        let set: BTreeSet<&String> = a.iter().collect();
        assert_eq!(set.len(), 10);
        assert_ne!(a, sample_next_batch(&pool, 10, 0.05, 10).unwrap());
    }

    #[test]
    fn pool_errors() {
        assert!(sample_next_batch(&[], 1, 0.05, 0).is_err());
        assert!(sample_next_batch(&[("a", 0.5)], 2, 0.05, 0).is_err());
        assert!(sample_next_batch(&[("a", 0.5)], 1, 0.0, 0).is_err());
        assert_eq!(sample_next_batch(&[("a", 0.5)], 0, 0.05, 0).unwrap(), Vec::<String>::new());
    }
}
