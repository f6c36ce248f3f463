//! Paired bootstrap confidence intervals and the exact McNemar test.
//!
//! Resampling uses PCG64 (XSL-RR 128/64) seeded with `seed_from_u64`, with
//! Lemire's nearly-divisionless method for bounded indices, so a seed gives
//! the same resamples on every platform.

use alloc::format;
use alloc::vec::Vec;

use rand_core::SeedableRng;
use rand_pcg::Pcg64;
use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::rng::bounded;

/// A point estimate with percentile bounds, in percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub point: f64,
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn half_width(&self) -> f64 {
        (self.upper - self.lower) / 2.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub sr_a: Interval,
    pub sr_b: Interval,
    /// `sr_a − sr_b` under common resampled indices.
    pub diff: Interval,
    pub iters: usize,
    pub seed: u64,
    pub alpha: f64,
}

/// Linear-interpolation percentile (`q` in 0..=100) of ascending-sorted data.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q / 100.0;
    let lo = libm::floor(h) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn interval(mut samples: Vec<f64>, alpha: f64) -> Interval {
    let point = samples.iter().sum::<f64>() / samples.len() as f64;
    samples.sort_by(f64::total_cmp);
    let lower = percentile(&samples, 100.0 * alpha / 2.0);
    let upper = percentile(&samples, 100.0 * (1.0 - alpha / 2.0));
    // Guard against summation rounding pushing the mean a hair outside a
    // degenerate interval.
    Interval { point: point.clamp(samples[0], samples[samples.len() - 1]), lower, upper }
}

fn check_pair(y_a: &[bool], y_b: &[bool]) -> Result<(), MetricsError> {
    if y_a.len() != y_b.len() {
        return Err(MetricsError::LengthMismatch(y_a.len(), y_b.len()));
    }
    if y_a.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    Ok(())
}

/// Paired task-level bootstrap: both vectors are scored on the same `iters`
/// resamples of task indices.
pub fn paired_bootstrap(
    y_a: &[bool],
    y_b: &[bool],
    iters: usize,
    seed: u64,
    alpha: f64,
) -> Result<BootstrapResult, MetricsError> {
    check_pair(y_a, y_b)?;
    if iters == 0 {
        return Err(MetricsError::InvalidArgument("iters must be at least 1".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(MetricsError::InvalidArgument(format!("alpha {alpha} not in (0,1)")));
    }
    let n = y_a.len();
    let mut rng = Pcg64::seed_from_u64(seed);
    let (mut sa, mut sb, mut sd) = (Vec::with_capacity(iters), Vec::with_capacity(iters), Vec::with_capacity(iters));
    for _ in 0..iters {
        let (mut ca, mut cb) = (0i64, 0i64);
        for _ in 0..n {
            let i = bounded(&mut rng, n as u64) as usize;
            ca += i64::from(y_a[i]);
            cb += i64::from(y_b[i]);
        }
        sa.push(100.0 * ca as f64 / n as f64);
        sb.push(100.0 * cb as f64 / n as f64);
        sd.push(100.0 * (ca - cb) as f64 / n as f64);
    }
    Ok(BootstrapResult {
        sr_a: interval(sa, alpha),
        sr_b: interval(sb, alpha),
        diff: interval(sd, alpha),
        iters,
        seed,
        alpha,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McNemarResult {
    /// Tasks where only `a` succeeded.
    pub b: u64,
    /// Tasks where only `b` succeeded.
    pub c: u64,
    pub p_value: f64,
}

/// `P(X ≤ k)` for `X ~ Binomial(n, 1/2)`, summed in log space.
fn binom_half_cdf(k: u64, n: u64) -> f64 {
    let ln_half_n = n as f64 * -core::f64::consts::LN_2;
    let ln_choose = |j: u64| libm::lgamma((n + 1) as f64) - libm::lgamma((j + 1) as f64) - libm::lgamma((n - j + 1) as f64);
    let terms: Vec<f64> = (0..=k).map(|j| ln_choose(j) + ln_half_n).collect();
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    libm::exp(max) * terms.iter().map(|t| libm::exp(t - max)).sum::<f64>()
}

/// Exact two-sided McNemar test on the discordant pairs. With no
/// discordant pairs the p-value is 1 by convention.
pub fn mcnemar(y_a: &[bool], y_b: &[bool]) -> Result<McNemarResult, MetricsError> {
    check_pair(y_a, y_b)?;
    let b = y_a.iter().zip(y_b).filter(|(a, b)| **a && !**b).count() as u64;
    let c = y_a.iter().zip(y_b).filter(|(a, b)| !**a && **b).count() as u64;
    Ok(McNemarResult { b, c, p_value: mcnemar_p(b, c) })
}

/// `min(1, 2·P(X ≤ min(b,c)))` with `X ~ Binomial(b+c, 1/2)`.
pub fn mcnemar_p(b: u64, c: u64) -> f64 {
    let n = b + c;
    if n == 0 {
        return 1.0;
    }
    (2.0 * binom_half_cdf(b.min(c), n)).min(1.0)
}
