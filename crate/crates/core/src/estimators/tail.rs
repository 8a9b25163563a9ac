//! Tail-shape classification of nonnegative integer samples.
//!
//! The sample must have at least [`MIN_EXCEEDANCES`] values above its 90th
//! percentile `u`. The empirical log-survival `ln P(X ≥ x)` is then regressed
//! once on `x` (straight for geometric-like tails) and once on `ln x`
//! (straight for power-like tails), over an evenly spaced grid of up to 64
//! integers starting above the 99th percentile and ending at the last value
//! with at least [`MIN_BEYOND`] samples at or above it. Starting that high
//! keeps the bend between the bulk and the tail out of the fit.
//! The better fit wins when its residual sum of squares is smaller by at
//! least [`SSE_MARGIN`]; otherwise the tail is inconclusive.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::stats::fit_line;
use crate::delay::DelaySeries;

pub const MIN_EXCEEDANCES: u64 = 1000;
pub const MIN_BEYOND: u64 = 100;
/// Fits start just above this quantile (or above `u`, whichever is larger).
pub const FIT_QUANTILE: f64 = 0.99;
const GRID_POINTS: u64 = 64;
pub const SSE_MARGIN: f64 = 2.0;
const DENSE_LIMIT: u64 = 1 << 20;

/// Counts of nonnegative integer values: dense below 2²⁰, sparse above.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValueHistogram {
    dense: Vec<u64>,
    sparse: BTreeMap<u64, u64>,
    total: u64,
}

impl ValueHistogram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_values<I: IntoIterator<Item = u64>>(values: I) -> Self {
        let mut h = Self::new();
        for v in values {
            h.push(v);
        }
        h
    }

    pub fn from_delays(series: &DelaySeries) -> Self {
        Self::from_values(series.delays())
    }

    #[inline]
    pub fn push(&mut self, v: u64) {
        self.push_n(v, 1);
    }

    #[inline]
    pub fn push_n(&mut self, v: u64, n: u64) {
        if v < DENSE_LIMIT {
            let i = v as usize;
            if i >= self.dense.len() {
                self.dense.resize(i + 1, 0);
            }
            self.dense[i] += n;
        } else {
            *self.sparse.entry(v).or_insert(0) += n;
        }
        self.total += n;
    }

    pub fn merge(&mut self, other: &ValueHistogram) {
        for (v, &c) in other.dense.iter().enumerate() {
            if c > 0 {
                self.push_n(v as u64, c);
            }
        }
        for (&v, &c) in &other.sparse {
            self.push_n(v, c);
        }
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// `(value, count)` pairs with nonzero count, ascending.
    pub fn iter(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.dense
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(v, &c)| (v as u64, c))
            .chain(self.sparse.iter().map(|(&v, &c)| (v, c)))
    }

    /// Smallest `x` with `P(X ≤ x) ≥ p`.
    pub fn quantile(&self, p: f64) -> Option<u64> {
        if self.total == 0 {
            return None;
        }
        let target = (p.clamp(0.0, 1.0) * self.total as f64).ceil().max(1.0) as u64;
        let mut acc = 0;
        for (v, c) in self.iter() {
            acc += c;
            if acc >= target {
                return Some(v);
            }
        }
        self.iter().last().map(|(v, _)| v)
    }

    /// Number of samples strictly greater than `x`.
    pub fn count_above(&self, x: u64) -> u64 {
        self.iter().filter(|&(v, _)| v > x).map(|(_, c)| c).sum()
    }

    pub fn mean(&self) -> Option<f64> {
        (self.total > 0)
            .then(|| self.iter().map(|(v, c)| v as f64 * c as f64).sum::<f64>() / self.total as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailClass {
    GeometricLike,
    PowerLike,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub classification: TailClass,
    /// Per-unit decay rate for geometric-like tails, Hill tail index for
    /// power-like ones.
    pub exponent: Option<f64>,
    /// R² of the winning fit.
    pub goodness_of_fit: Option<f64>,
    pub samples: u64,
    pub threshold: Option<u64>,
    pub exceedances: u64,
    pub sse_geometric: Option<f64>,
    pub sse_power: Option<f64>,
    /// Negated slope of log-survival against `x`.
    pub geometric_rate: Option<f64>,
    /// Negated slope of log-survival against `ln x`.
    pub power_slope: Option<f64>,
    pub hill: Option<f64>,
}

impl TailReport {
    fn empty(samples: u64) -> Self {
        Self {
            classification: TailClass::Inconclusive,
            exponent: None,
            goodness_of_fit: None,
            samples,
            threshold: None,
            exceedances: 0,
            sse_geometric: None,
            sse_power: None,
            geometric_rate: None,
            power_slope: None,
            hill: None,
        }
    }
}

/// Hill estimate of the tail index from the samples strictly above
/// `threshold`, with a half-unit continuity correction for integer data:
/// `α̂ = k / Σ ln(X_i / (threshold + ½))`.
pub fn hill_estimate(hist: &ValueHistogram, threshold: u64) -> Option<f64> {
    let base = threshold as f64 + 0.5;
    let (mut k, mut s) = (0u64, 0.0);
    for (v, c) in hist.iter().filter(|&(v, _)| v > threshold) {
        k += c;
        s += c as f64 * (v as f64 / base).ln();
    }
    (k > 0 && s > 0.0).then(|| k as f64 / s)
}

/// Hill estimate over the top `fraction` of the sample.
pub fn hill_top_fraction(hist: &ValueHistogram, fraction: f64) -> Option<f64> {
    hill_estimate(hist, hist.quantile(1.0 - fraction)?)
}

pub fn tail_classify(hist: &ValueHistogram) -> TailReport {
    let n = hist.total();
    let mut report = TailReport::empty(n);
    let Some(u) = hist.quantile(0.9) else {
        return report;
    };
    let pairs: Vec<(u64, u64)> = hist.iter().filter(|&(v, _)| v > u).collect();
    let exceed: u64 = pairs.iter().map(|p| p.1).sum();
    report.threshold = Some(u);
    report.exceedances = exceed;
    if exceed < MIN_EXCEEDANCES {
        return report;
    }

    // survival at each observed value above u: count of samples ≥ value
    let mut at_least = Vec::with_capacity(pairs.len());
    let mut acc = exceed;
    for &(v, c) in &pairs {
        at_least.push((v, acc));
        acc -= c;
    }
    let survival = |x: u64| -> u64 {
        let i = at_least.partition_point(|&(v, _)| v < x);
        at_least.get(i).map_or(0, |p| p.1)
    };
    let lo = hist.quantile(FIT_QUANTILE).map_or(u, |q| q.max(u)) + 1;
    let hi = at_least
        .iter()
        .rev()
        .find(|p| p.1 >= MIN_BEYOND)
        .map_or(lo, |p| p.0);
    let mut grid: Vec<(u64, u64)> = Vec::new();
    if hi >= lo + 3 {
        let steps = (hi - lo).min(GRID_POINTS - 1);
        grid = (0..=steps)
            .map(|k| lo + (hi - lo) * k / steps)
            .map(|x| (x, survival(x)))
            .collect();
        grid.dedup();
    }
    if grid.len() < 4 {
        return report;
    }
    let y: Vec<f64> = grid
        .iter()
        .map(|&(_, c)| (c as f64 / n as f64).ln())
        .collect();
    let xs: Vec<f64> = grid.iter().map(|&(x, _)| x as f64).collect();
    let lxs: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let (Some(geo), Some(pow)) = (fit_line(&xs, &y), fit_line(&lxs, &y)) else {
        return report;
    };
    report.sse_geometric = Some(geo.sse);
    report.sse_power = Some(pow.sse);
    report.geometric_rate = Some(-geo.slope);
    report.power_slope = Some(-pow.slope);
    report.hill = hill_top_fraction(hist, 0.01).or_else(|| hill_estimate(hist, u));

    if geo.sse * SSE_MARGIN < pow.sse {
        report.classification = TailClass::GeometricLike;
        report.exponent = Some(-geo.slope);
        report.goodness_of_fit = Some(geo.r_squared);
    } else if pow.sse * SSE_MARGIN < geo.sse {
        report.classification = TailClass::PowerLike;
        report.exponent = report.hill;
        report.goodness_of_fit = Some(pow.r_squared);
    }
    report
}
