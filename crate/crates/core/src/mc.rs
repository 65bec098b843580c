//! Monte Carlo plumbing shared by the estimators.
//!
//! Every estimator splits its trials into fixed batches; batch `b` draws from
//! the ChaCha stream `b` of the master seed. Batches are reduced in index
//! order with compensated sums, so a result depends only on
//! `(inputs, seed, trials)` and not on how many threads ran it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Deterministic generator for substream `stream` of `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.add(other.carry);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// First and second moments of a stream of observations.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub count: u64,
    sum: CompensatedSum,
    sum_sq: CompensatedSum,
}

impl Moments {
    pub fn push(&mut self, v: f64) {
        self.count += 1;
        self.sum.add(v);
        self.sum_sq.add(v * v);
    }

    pub fn merge(&mut self, other: &Moments) {
        self.count += other.count;
        self.sum.merge(&other.sum);
        self.sum_sq.merge(&other.sum_sq);
    }

    pub fn sum(&self) -> f64 {
        self.sum.value()
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.sum.value() / self.count as f64
        }
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let n = self.count as f64;
        let m = self.mean();
        ((self.sum_sq.value() - n * m * m) / (n - 1.0)).max(0.0)
    }

    /// Normal-approximation standard error of the mean.
    pub fn stderr(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }
}

/// Number of trials per batch. Fixed so that results do not depend on the
/// size of the thread pool.
pub const BATCH_TRIALS: u64 = 4096;

/// Run `trials` trials in fixed batches and reduce the per-batch states in
/// batch order.
pub fn run_batched<S, F>(trials: u64, seed: u64, init: impl Fn() -> S + Sync, body: F) -> S
where
    S: Send + Merge,
    F: Fn(&mut S, &mut ChaCha8Rng, u64) + Sync,
{
    let batches = trials.div_ceil(BATCH_TRIALS);
    let parts: Vec<S> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut state = init();
            let mut rng = stream_rng(seed, b);
            let lo = b * BATCH_TRIALS;
            let hi = (lo + BATCH_TRIALS).min(trials);
            for t in lo..hi {
                body(&mut state, &mut rng, t);
            }
            state
        })
        .collect();
    let mut acc = init();
    for p in &parts {
        acc.merge_from(p);
    }
    acc
}

/// Associative merge of batch accumulators.
pub trait Merge {
    fn merge_from(&mut self, other: &Self);
}

impl Merge for Moments {
    fn merge_from(&mut self, other: &Self) {
        self.merge(other);
    }
}

impl<const K: usize> Merge for [Moments; K] {
    fn merge_from(&mut self, other: &Self) {
        for (a, b) in self.iter_mut().zip(other) {
            a.merge(b);
        }
    }
}
