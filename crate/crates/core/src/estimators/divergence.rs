//! Finite-horizon heuristic for "does `E[min{X, M}]` keep growing in `M`".
//!
//! No finite sample can prove a mean infinite. The classifier looks at the
//! log-log slope of the curve over the top half of the ladder and at the
//! relative increase over its last step:
//!
//! * `diverging` when the slope exceeds [`DIVERGING_SLOPE`] and its 95%
//!   interval excludes 0;
//! * `finite` when the last step rises by less than [`SATURATION_STEP`] and
//!   the slope's 95% interval stays below [`DIVERGING_SLOPE`];
//! * `inconclusive` otherwise, or when the curve is unusable.

use serde::{Deserialize, Serialize};

use super::renewal::TruncatedMeanCurve;
use super::stats::Z95;

pub const DIVERGING_SLOPE: f64 = 0.2;
pub const SATURATION_STEP: f64 = 0.05;
pub const MIN_POINTS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Divergence {
    Finite,
    Diverging,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceReport {
    pub verdict: Divergence,
    /// Log-log slope over the top half of the ladder.
    pub slope: Option<f64>,
    pub slope_ci: Option<(f64, f64)>,
    /// `(est[L−1] − est[L−2]) / est[L−2]`.
    pub last_step_increase: Option<f64>,
    pub last_first_ratio: Option<f64>,
    /// Always true: the verdict is a finite-sample surrogate.
    pub heuristic: bool,
}

impl DivergenceReport {
    fn inconclusive() -> Self {
        Self {
            verdict: Divergence::Inconclusive,
            slope: None,
            slope_ci: None,
            last_step_increase: None,
            last_first_ratio: None,
            heuristic: true,
        }
    }
}

pub fn classify_divergence(curve: &TruncatedMeanCurve) -> DivergenceReport {
    if !curve.is_usable() {
        return DivergenceReport::inconclusive();
    }
    classify_with(
        &curve.levels,
        &curve.estimates,
        &curve.stderrs,
        curve.top_slope_se,
    )
}

/// Classifier on raw `(M, estimate, stderr)` triples, treating the points as
/// independent. Missing or non-finite standard errors count as zero.
pub fn classify_points(levels: &[u64], estimates: &[f64], stderrs: &[f64]) -> DivergenceReport {
    classify_with(levels, estimates, stderrs, None)
}

/// As [`classify_points`], but a known slope standard error (for example
/// from a joint bootstrap of the whole curve) replaces the propagated one.
pub fn classify_with(
    levels: &[u64],
    estimates: &[f64],
    stderrs: &[f64],
    slope_se: Option<f64>,
) -> DivergenceReport {
    let l = levels.len();
    if l < MIN_POINTS
        || estimates.len() != l
        || estimates.iter().any(|e| !e.is_finite() || *e < 0.0)
    {
        return DivergenceReport::inconclusive();
    }
    let mut report = DivergenceReport::inconclusive();
    if estimates.iter().all(|&e| e == 0.0) {
        report.verdict = Divergence::Finite;
        report.slope = Some(0.0);
        report.slope_ci = Some((0.0, 0.0));
        report.last_step_increase = Some(0.0);
        return report;
    }
    report.last_first_ratio = (estimates[0] > 0.0).then(|| estimates[l - 1] / estimates[0]);
    let prev = estimates[l - 2];
    report.last_step_increase = (prev > 0.0).then(|| (estimates[l - 1] - prev) / prev);

    let top = l / 2..l;
    if estimates[top.clone()].iter().any(|&e| e <= 0.0) {
        return report;
    }
    let x: Vec<f64> = levels[top.clone()]
        .iter()
        .map(|&m| (m as f64).ln())
        .collect();
    let y: Vec<f64> = estimates[top.clone()].iter().map(|e| e.ln()).collect();
    let rel_se: Vec<f64> = top
        .map(|i| {
            let se = stderrs.get(i).copied().unwrap_or(0.0);
            if se.is_finite() {
                se / estimates[i]
            } else {
                0.0
            }
        })
        .collect();
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let weights: Vec<f64> = x.iter().map(|v| (v - mx) / sxx).collect();
    let slope: f64 = weights.iter().zip(&y).map(|(w, y)| w * y).sum();
    let se = slope_se.filter(|s| s.is_finite()).unwrap_or_else(|| {
        weights
            .iter()
            .zip(&rel_se)
            .map(|(w, s)| (w * s).powi(2))
            .sum::<f64>()
            .sqrt()
    });
    let ci = (slope - Z95 * se, slope + Z95 * se);
    report.slope = Some(slope);
    report.slope_ci = Some(ci);

    report.verdict = if slope > DIVERGING_SLOPE && ci.0 > 0.0 {
        Divergence::Diverging
    } else if report
        .last_step_increase
        .is_some_and(|r| r < SATURATION_STEP)
        && ci.1 < DIVERGING_SLOPE
    {
        Divergence::Finite
    } else {
        Divergence::Inconclusive
    };
    report
}
