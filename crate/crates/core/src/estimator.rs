//! Mergeable Monte Carlo sufficient statistics and the batch partition used by
//! every estimator.

use rayon::prelude::*;
use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};

/// Trials per batch unless a caller overrides it. Batch `i` draws from RNG
/// stream `i`, so results depend on the partition but never on the worker count.
pub const DEFAULT_BATCH_SIZE: usize = 1024;

/// Running `(count, sum, sum of squares)` of a scalar observable.
#[derive(Clone, Copy, Debug, Default, PartialEq, Deserialize)]
pub struct EstimatorResult {
    pub count: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl EstimatorResult {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.count += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn absorb(&mut self, other: &EstimatorResult) {
        self.count += other.count;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.count as f64
    }

    /// Sample variance with the `count - 1` denominator.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            return f64::NAN;
        }
        let n = self.count as f64;
        let m = self.mean();
        ((self.sum_sq / n - m * m) * n / (n - 1.0)).max(0.0)
    }

    /// `sqrt((sum_sq/count - mean²) / (count - 1))`; NaN below two samples.
    pub fn stderr(&self) -> f64 {
        if self.count < 2 {
            return f64::NAN;
        }
        let n = self.count as f64;
        let m = self.mean();
        ((self.sum_sq / n - m * m).max(0.0) / (n - 1.0)).sqrt()
    }

    /// Distance from `reference` in standard errors.
    pub fn z_score(&self, reference: f64) -> f64 {
        (self.mean() - reference) / self.stderr()
    }

    pub fn within_sigmas(&self, reference: f64, k: f64) -> bool {
        (self.mean() - reference).abs() <= k * self.stderr()
    }
}

impl FromIterator<f64> for EstimatorResult {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = EstimatorResult::new();
        for x in iter {
            acc.push(x);
        }
        acc
    }
}

impl Serialize for EstimatorResult {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("EstimatorResult", 5)?;
        s.serialize_field("count", &self.count)?;
        s.serialize_field("sum", &self.sum)?;
        s.serialize_field("sum_sq", &self.sum_sq)?;
        s.serialize_field("mean", &self.mean())?;
        s.serialize_field("stderr", &self.stderr())?;
        s.end()
    }
}

/// Pools partial results in the given order.
pub fn merge(partials: &[EstimatorResult]) -> Result<EstimatorResult> {
    let (first, rest) = partials
        .split_first()
        .ok_or_else(|| Error::Domain("cannot merge an empty list of estimator results".into()))?;
    let mut acc = *first;
    for p in rest {
        acc.absorb(p);
    }
    Ok(acc)
}

/// Two observables sampled together, with their cross moment so the ratio of
/// means gets a delta-method standard error.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PairedEstimate {
    pub x: EstimatorResult,
    pub y: EstimatorResult,
    pub sum_xy: f64,
}

impl PairedEstimate {
    pub fn push(&mut self, x: f64, y: f64) {
        self.x.push(x);
        self.y.push(y);
        self.sum_xy += x * y;
    }

    pub fn absorb(&mut self, other: &PairedEstimate) {
        self.x.absorb(&other.x);
        self.y.absorb(&other.y);
        self.sum_xy += other.sum_xy;
    }

    pub fn count(&self) -> u64 {
        self.x.count
    }

    /// Sample covariance of x and y.
    pub fn covariance(&self) -> f64 {
        let n = self.count() as f64;
        (self.sum_xy / n - self.x.mean() * self.y.mean()) * n / (n - 1.0)
    }

    pub fn ratio(&self) -> f64 {
        self.x.mean() / self.y.mean()
    }

    pub fn ratio_stderr(&self) -> f64 {
        let n = self.count() as f64;
        if n < 2.0 {
            return f64::NAN;
        }
        let (mx, my) = (self.x.mean(), self.y.mean());
        let r = mx / my;
        let rel = self.x.variance() / (mx * mx) + self.y.variance() / (my * my)
            - 2.0 * self.covariance() / (mx * my);
        r.abs() * (rel.max(0.0) / n).sqrt()
    }
}

/// `(stream index, trials)` for each batch of a run of `samples` trials.
pub fn partition(samples: usize, batch_size: usize) -> Vec<(u64, usize)> {
    let batch_size = batch_size.max(1);
    (0..samples.div_ceil(batch_size))
        .map(|i| {
            let start = i * batch_size;
            (i as u64, batch_size.min(samples - start))
        })
        .collect()
}

/// Runs `work` on every batch in parallel and returns results in batch order.
pub fn run_batches<T, F>(samples: usize, batch_size: usize, work: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, usize) -> T + Sync,
{
    partition(samples, batch_size)
        .into_par_iter()
        .map(|(stream, trials)| work(stream, trials))
        .collect()
}
