//! Sufficient statistics, deterministic replicate reduction, and KS tests.

use rayon::prelude::*;

use crate::rng::{replicate_rng, StreamRng};

/// Replicates handled per work unit. Fixed so that the reduction tree is the
/// same for every thread count.
pub const REPLICATE_CHUNK: u64 = 1024;

/// Running `(count, sum, sum of squares)` of a scalar observable.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub count: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn merge(&mut self, other: &Moments) {
        self.count += other.count;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            f64::NAN
        } else {
            self.sum / self.count as f64
        }
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            return f64::NAN;
        }
        let n = self.count as f64;
        let mean = self.sum / n;
        ((self.sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
    }

    pub fn std_error(&self) -> f64 {
        (self.variance() / self.count as f64).sqrt()
    }
}

/// Joint moments of a pair, for ratio estimators.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PairMoments {
    pub x: Moments,
    pub y: Moments,
    pub sum_xy: f64,
}

impl PairMoments {
    pub fn push(&mut self, x: f64, y: f64) {
        self.x.push(x);
        self.y.push(y);
        self.sum_xy += x * y;
    }

    pub fn merge(&mut self, other: &PairMoments) {
        self.x.merge(&other.x);
        self.y.merge(&other.y);
        self.sum_xy += other.sum_xy;
    }

    pub fn covariance(&self) -> f64 {
        let n = self.x.count as f64;
        if n < 2.0 {
            return f64::NAN;
        }
        (self.sum_xy - n * self.x.mean() * self.y.mean()) / (n - 1.0)
    }

    /// `E[x]/E[y]` with its delta-method standard error.
    pub fn ratio(&self) -> (f64, f64) {
        let mx = self.x.mean();
        let my = self.y.mean();
        let r = mx / my;
        let n = self.x.count as f64;
        let var = (self.x.variance() - 2.0 * r * self.covariance() + r * r * self.y.variance()) / (my * my);
        (r, (var.max(0.0) / n).sqrt())
    }
}

/// Something replicate observations can be folded into.
pub trait Accumulator: Send {
    fn merge(&mut self, other: Self);
}

impl Accumulator for Moments {
    fn merge(&mut self, other: Self) {
        Moments::merge(self, &other);
    }
}

impl Accumulator for PairMoments {
    fn merge(&mut self, other: Self) {
        PairMoments::merge(self, &other);
    }
}

impl<A: Accumulator, B: Accumulator> Accumulator for (A, B) {
    fn merge(&mut self, other: Self) {
        self.0.merge(other.0);
        self.1.merge(other.1);
    }
}

impl<T: Send> Accumulator for Vec<T> {
    fn merge(&mut self, mut other: Self) {
        self.append(&mut other);
    }
}

/// Runs `reps` replicates, each on its own stream, and folds the observations.
///
/// Chunks are reduced in index order, so the result is bit-identical for any
/// size of the rayon pool this runs in.
pub fn run_replicates<A, Init, Obs>(reps: u64, seed: u64, init: Init, observe: Obs) -> A
where
    A: Accumulator,
    Init: Fn() -> A + Sync,
    Obs: Fn(&mut A, u64, &mut StreamRng) + Sync,
{
    let chunks = reps.div_ceil(REPLICATE_CHUNK);
    let partials: Vec<A> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = init();
            let start = c * REPLICATE_CHUNK;
            let end = (start + REPLICATE_CHUNK).min(reps);
            for rep in start..end {
                let mut rng = replicate_rng(seed, rep);
                observe(&mut acc, rep, &mut rng);
            }
            acc
        })
        .collect();
    let mut total = init();
    for p in partials {
        total.merge(p);
    }
    total
}

/// Asymptotic Kolmogorov critical coefficient `c(α) = sqrt(-ln(α/2)/2)`.
pub fn ks_critical_coefficient(alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt()
}

/// One-sample KS statistic of `samples` against `cdf`. Sorts in place.
pub fn ks_one_sample(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(|a, b| a.total_cmp(b));
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Two-sample KS statistic. Sorts both inputs in place.
pub fn ks_two_sample(a: &mut [f64], b: &mut [f64]) -> f64 {
    a.sort_by(|x, y| x.total_cmp(y));
    b.sort_by(|x, y| x.total_cmp(y));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

pub fn ks_two_sample_critical(alpha: f64, na: usize, nb: usize) -> f64 {
    let (na, nb) = (na as f64, nb as f64);
    ks_critical_coefficient(alpha) * ((na + nb) / (na * nb)).sqrt()
}
