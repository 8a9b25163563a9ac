//! Analytic verdicts for the three-queue network: stability-region membership
//! and per-queue delay stability under Max-Weight.
//!
//! The region is the set of `λ > 0` for which some `μ₁₂ ≥ max{λ₁, λ₂}`,
//! `μ₃ ≥ λ₃` with `μ₁₂ + μ₃ < 1` exist. Taking `μ₁₂ = max{λ₁, λ₂}` and
//! `μ₃ = λ₃` is optimal, so membership reduces to `max{λ₁, λ₂} + λ₃ < 1`;
//! conversely any witness gives `max{λ₁, λ₂} + λ₃ ≤ μ₁₂ + μ₃ < 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `|2λ₂ − (1 + λ₁ − λ₃)|` at or below this counts as the boundary.
pub const BOUNDARY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueueVerdict {
    DelayStable,
    DelayUnstable,
    Boundary,
    NotApplicable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub mu12: f64,
    pub mu3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityCheck {
    pub stable: bool,
    /// `1 − max{λ₁, λ₂} − λ₃`.
    pub gap: f64,
    /// Service split proving membership; `None` when unstable.
    pub witness: Option<Witness>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionVerdict {
    pub lambda: [f64; 3],
    pub stable: bool,
    /// `(1 + λ₁ − λ₃) / 2`.
    pub threshold: f64,
    pub witness: Option<Witness>,
    pub queue_verdicts: [QueueVerdict; 3],
}

pub(crate) fn rates3(lambda: &[f64]) -> Result<[f64; 3]> {
    let l: [f64; 3] = lambda.try_into().map_err(|_| Error::Dimension {
        expected: 3,
        got: lambda.len(),
    })?;
    if let Some(bad) = l.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::domain(format!(
            "arrival rates must be finite and strictly positive, got {bad}"
        )));
    }
    Ok(l)
}

/// Signed distance `2λ₂ − (1 + λ₁ − λ₃)` of queue 2 from its threshold.
pub fn queue2_margin(lambda: [f64; 3]) -> f64 {
    2.0 * lambda[1] - (1.0 + lambda[0] - lambda[2])
}

pub fn in_stability_region(lambda: &[f64]) -> Result<StabilityCheck> {
    let l = rates3(lambda)?;
    let m = l[0].max(l[1]);
    let gap = 1.0 - m - l[2];
    let stable = m + l[2] < 1.0;
    let witness = stable.then(|| Witness {
        mu12: m + gap / 2.0,
        mu3: l[2] + gap / 4.0,
    });
    Ok(StabilityCheck {
        stable,
        gap,
        witness,
    })
}

/// Delay-stability verdicts with queue `heavy_queue` (1-based) carrying the
/// heavy-tailed traffic. Only the assignment `heavy_queue = 1` is covered.
pub fn classify(lambda: &[f64], heavy_queue: usize) -> Result<RegionVerdict> {
    if heavy_queue != 1 {
        return Err(Error::domain(format!(
            "verdicts are only known for heavy traffic at queue 1, got queue {heavy_queue}"
        )));
    }
    let l = rates3(lambda)?;
    let check = in_stability_region(&l)?;
    let threshold = (1.0 + l[0] - l[2]) / 2.0;
    let queue_verdicts = if !check.stable {
        [QueueVerdict::NotApplicable; 3]
    } else {
        let margin = queue2_margin(l);
        let q2 = if margin.abs() <= BOUNDARY_TOLERANCE {
            QueueVerdict::Boundary
        } else if margin > 0.0 {
            QueueVerdict::DelayUnstable
        } else {
            QueueVerdict::DelayStable
        };
        [QueueVerdict::DelayUnstable, q2, QueueVerdict::DelayUnstable]
    };
    Ok(RegionVerdict {
        lambda: l,
        stable: check.stable,
        threshold,
        witness: check.witness,
        queue_verdicts,
    })
}
