use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::percentile_sorted;

pub const DEFAULT_REPLICATES: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapCi {
    pub lo: f64,
    pub hi: f64,
    pub n_defined: usize,
    pub n_undefined: usize,
}

impl BootstrapCi {
    /// Widens the interval so it contains `point`.
    pub fn containing(self, point: f64) -> Self {
        BootstrapCi {
            lo: self.lo.min(point),
            hi: self.hi.max(point),
            ..self
        }
    }
}

/// Indices of resample `b`: `n` draws with replacement from its own stream.
pub fn resample(n: usize, seed: u64, b: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(b as u64);
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

/// Percentile-method 95% interval of `metric` over `replicates` resamples.
/// Replicates where the metric is undefined are dropped and counted; more
/// than half undefined is an error.
pub fn bootstrap_ci<F>(n: usize, replicates: usize, seed: u64, mut metric: F) -> Result<BootstrapCi>
where
    F: FnMut(&[usize]) -> Option<f64>,
{
    if n == 0 || replicates == 0 {
        return Err(Error::invalid("bootstrap needs data and at least one replicate"));
    }
    let mut values = Vec::with_capacity(replicates);
    for b in 0..replicates {
        if let Some(v) = metric(&resample(n, seed, b)) {
            values.push(v);
        }
    }
    let n_undefined = replicates - values.len();
    if 2 * n_undefined > replicates {
        return Err(Error::Undefined(format!(
            "{n_undefined} of {replicates} bootstrap replicates were undefined"
        )));
    }
    values.sort_by(f64::total_cmp);
    Ok(BootstrapCi {
        lo: percentile_sorted(&values, 0.025),
        hi: percentile_sorted(&values, 0.975),
        n_defined: values.len(),
        n_undefined,
    })
}
