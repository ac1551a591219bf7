//! Binomial confidence intervals.

use serde::{Deserialize, Serialize};

/// Two-sided 99% standard normal quantile.
pub const Z_99: f64 = 2.575_829_303_548_900_4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub low: f64,
    pub high: f64,
}

impl Interval {
    pub fn contains(&self, v: f64) -> bool {
        self.low <= v && v <= self.high
    }
}

/// Wilson score interval for `successes` out of `trials`.
pub fn wilson(successes: u64, trials: u64, z: f64) -> Interval {
    assert!(trials > 0 && successes <= trials);
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    Interval { low: (centre - half).max(0.0), high: (centre + half).min(1.0) }
}

/// Newcombe's hybrid score interval for the difference `p1 - p0` of two
/// independent proportions, built from the two Wilson intervals.
pub fn newcombe_difference(s1: u64, n1: u64, s0: u64, n0: u64, z: f64) -> Interval {
    let p1 = s1 as f64 / n1 as f64;
    let p0 = s0 as f64 / n0 as f64;
    let w1 = wilson(s1, n1, z);
    let w0 = wilson(s0, n0, z);
    let d = p1 - p0;
    Interval {
        low: d - ((p1 - w1.low).powi(2) + (w0.high - p0).powi(2)).sqrt(),
        high: d + ((w1.high - p1).powi(2) + (p0 - w0.low).powi(2)).sqrt(),
    }
}

/// Standard deviation of a binomial proportion.
pub fn binomial_sigma(p: f64, trials: u64) -> f64 {
    (p * (1.0 - p) / trials as f64).sqrt()
}
