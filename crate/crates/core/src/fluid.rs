//! Fluid picture of a single large burst at queue 1 and its check against
//! simulation.
//!
//! Phase 1: queue 1 drains at `1 − λ₁` while queue 3 fills at `λ₃`, until
//! `Q₃ = Q₁` at `T₁ = b / (1 + λ₃ − λ₁)`. Phase 2: Max-Weight keeps
//! `Q₃ = Q₁ + Q₂`, serving queues 1 and 2 at `μ₁ = μ₂` and queue 3 at
//! `μ₃ = 1 − μ₁`, until queue 1 or queue 3 empties at `T₂`. When queue 2
//! would drain faster than it fills it stays at zero instead, served at its
//! arrival rate, and the balance holds on queues 1 and 3 alone.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arrivals::ArrivalSpec;
use crate::error::{Error, Result};
use crate::network::ScheduleSet;
use crate::region::{in_stability_region, queue2_margin, rates3, BOUNDARY_TOLERANCE};
use crate::report::fmt_f64;
use crate::sim::Simulator;

/// Bursts smaller than this are reported without pass/fail.
pub const MIN_RELIABLE_BURST: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Emptier {
    Queue1,
    Queue3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluidTrajectory {
    pub lambda: [f64; 3],
    pub b: f64,
    pub t1: f64,
    pub t2: f64,
    pub q1_t1: f64,
    pub q3_t1: f64,
    /// Phase-2 service rates.
    pub mu: [f64; 3],
    pub q2_growth_rate: f64,
    pub q2_peak: f64,
    pub phase2_emptier: Emptier,
    /// Queue 2 held at zero in phase 2.
    pub queue2_capped: bool,
    /// `(λ₁ + λ₂ − μ₁ − μ₂) − (λ₃ − μ₃)` when queue 2 grows, otherwise the
    /// same balance on queues 1 and 3.
    pub balance_residual: f64,
}

pub fn fluid_burst(lambda: &[f64], b: f64) -> Result<FluidTrajectory> {
    let l = rates3(lambda)?;
    if !in_stability_region(&l)?.stable {
        return Err(Error::domain(format!(
            "rates {l:?} lie outside the stability region"
        )));
    }
    if !(b.is_finite() && b >= 0.0) {
        return Err(Error::domain(format!(
            "burst size must be finite and nonnegative, got {b}"
        )));
    }
    if l[1] >= 1.0 {
        return Err(Error::domain("queue 2 rate must be below 1"));
    }
    let d1 = 1.0 + l[2] - l[0];
    if d1 <= 0.0 {
        return Err(Error::domain(
            "phase 1 never ends: 1 + λ₃ − λ₁ must be positive",
        ));
    }
    let t1 = b / d1;
    let q3_t1 = l[2] * t1;
    let q1_t1 = b - (1.0 - l[0]) * t1;

    let grows = queue2_margin(l) > BOUNDARY_TOLERANCE;
    let (mu, balance_residual) = if grows {
        let m = (1.0 + l[0] + l[1] - l[2]) / 3.0;
        let mu = [m, m, 1.0 - m];
        (mu, (l[0] + l[1] - mu[0] - mu[1]) - (l[2] - mu[2]))
    } else {
        let m = (1.0 + l[0] - l[2]) / 2.0;
        let mu = [m, l[1], 1.0 - m];
        (mu, (l[0] - mu[0]) - (l[2] - mu[2]))
    };
    let q2_growth_rate = if grows { (l[1] - mu[1]).max(0.0) } else { 0.0 };

    let candidates = [
        (Emptier::Queue1, q1_t1, mu[0] - l[0]),
        (Emptier::Queue3, q3_t1, mu[2] - l[2]),
    ];
    let (phase2_emptier, duration) = candidates
        .iter()
        .filter(|c| c.2 > 0.0)
        .map(|&(e, q, d)| (e, q / d))
        .fold(None, |best: Option<(Emptier, f64)>, c| match best {
            Some(b) if b.1 <= c.1 => Some(b),
            _ => Some(c),
        })
        .ok_or_else(|| Error::domain("phase 2 never ends: neither queue 1 nor queue 3 drains"))?;
    Ok(FluidTrajectory {
        lambda: l,
        b,
        t1,
        t2: t1 + duration,
        q1_t1,
        q3_t1,
        mu,
        q2_growth_rate,
        q2_peak: q2_growth_rate * duration,
        phase2_emptier,
        queue2_capped: !grows,
        balance_residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BurstTolerance {
    /// On `|T̂₁ − T₁| / T₁`.
    pub t1_relative: f64,
    /// On `|μ̂₂ − μ₂|`.
    pub mu2_absolute: f64,
    /// On `|Q̂₂(T̂₂)/b − q₂ peak/b|`.
    pub q2_over_b_absolute: f64,
}

impl Default for BurstTolerance {
    fn default() -> Self {
        Self {
            t1_relative: 0.05,
            mu2_absolute: 0.02,
            q2_over_b_absolute: 0.03,
        }
    }
}

/// One burst-conditioned simulation next to its fluid prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BurstComparison {
    pub seed: u64,
    pub b: u64,
    pub fluid: FluidTrajectory,
    /// First `t > 0` with `Q₃(t) ≥ Q₁(t) + Q₂(t)`.
    pub t1_hat: Option<u64>,
    pub q3_t1_hat: Option<u64>,
    /// First `t > T̂₁` with `Q₁(t)·Q₃(t) = 0`.
    pub t2_hat: Option<u64>,
    /// Departures per slot from each queue over `[T̂₁, T̂₂)`.
    pub mu_hat: Option<[f64; 3]>,
    pub q2_t2_hat: Option<u64>,
    pub err_t1: Option<f64>,
    pub err_q3_t1: Option<f64>,
    pub err_mu2: Option<f64>,
    pub q2_peak_over_b: Option<f64>,
    pub high_variance: bool,
    /// `None` for small bursts or when a phase never ended.
    pub passed: Option<bool>,
}

fn relative(est: f64, exact: f64) -> f64 {
    if exact == 0.0 {
        est - exact
    } else {
        (est - exact) / exact
    }
}

/// Runs one burst: the system starts at `Q(0) = (b, 0, 0)` and evolves under
/// Max-Weight with the given arrival laws until `T̂₂`, or for at most
/// `slot_limit` slots.
pub fn compare_to_simulation(
    arrivals: &[ArrivalSpec],
    b: u64,
    seed: u64,
    tolerance: &BurstTolerance,
    slot_limit: u64,
) -> Result<BurstComparison> {
    let rates: Vec<f64> = arrivals.iter().map(ArrivalSpec::declared_mean).collect();
    let fluid = fluid_burst(&rates, b as f64)?;
    let mut sim = Simulator::new(ScheduleSet::three_queue(), arrivals, vec![b, 0, 0], seed, 0)?;

    let mut t1_hat = None;
    let mut q3_t1_hat = None;
    let mut t2_hat = None;
    let mut q2_t2_hat = None;
    let mut served = [0u64; 3];
    while sim.slot() < slot_limit {
        let rec = sim.advance();
        if t1_hat.is_some() {
            for (s, &d) in served.iter_mut().zip(&rec.served) {
                *s += u64::from(d);
            }
        }
        let t = rec.slot + 1;
        let q = &rec.post_lengths;
        match t1_hat {
            None if q[2] >= q[0] + q[1] => {
                t1_hat = Some(t);
                q3_t1_hat = Some(q[2]);
            }
            Some(_) if q[0] == 0 || q[2] == 0 => {
                t2_hat = Some(t);
                q2_t2_hat = Some(q[1]);
                break;
            }
            _ => {}
        }
    }
    let mu_hat = match (t1_hat, t2_hat) {
        (Some(a), Some(z)) if z > a => {
            let n = (z - a) as f64;
            Some(served.map(|s| s as f64 / n))
        }
        _ => None,
    };
    let err_t1 = t1_hat.map(|t| relative(t as f64, fluid.t1));
    let err_mu2 = mu_hat.map(|m| m[1] - fluid.mu[1]);
    let q2_peak_over_b = q2_t2_hat.filter(|_| b > 0).map(|q| q as f64 / b as f64);
    let high_variance = b < MIN_RELIABLE_BURST;
    let passed = match (high_variance, err_t1, err_mu2, q2_peak_over_b) {
        (false, Some(e1), Some(em), Some(q)) => Some(
            e1.abs() < tolerance.t1_relative
                && em.abs() <= tolerance.mu2_absolute
                && (q - fluid.q2_peak / fluid.b).abs() <= tolerance.q2_over_b_absolute,
        ),
        _ => None,
    };
    Ok(BurstComparison {
        seed,
        b,
        err_q3_t1: q3_t1_hat.map(|q| relative(q as f64, fluid.q3_t1)),
        fluid,
        t1_hat,
        q3_t1_hat,
        t2_hat,
        mu_hat,
        q2_t2_hat,
        err_t1,
        err_mu2,
        q2_peak_over_b,
        high_variance,
        passed,
    })
}

/// Default cap on simulated slots for a burst of size `b`.
pub fn default_slot_limit(b: u64) -> u64 {
    b.saturating_mul(100).saturating_add(1_000_000)
}

/// Medians over several bursts of the same size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BurstSummary {
    pub runs: usize,
    pub completed: usize,
    pub median_abs_err_t1: Option<f64>,
    pub median_mu2_hat: Option<f64>,
    pub median_q2_peak_over_b: Option<f64>,
    pub high_variance: bool,
    pub t1_ok: Option<bool>,
    pub mu2_ok: Option<bool>,
    pub q2_ok: Option<bool>,
    pub passed: Option<bool>,
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    })
}

pub fn summarize_bursts(runs: &[BurstComparison], tolerance: &BurstTolerance) -> BurstSummary {
    let done: Vec<&BurstComparison> = runs.iter().filter(|r| r.mu_hat.is_some()).collect();
    let e1 = median(done.iter().filter_map(|r| r.err_t1.map(f64::abs)).collect());
    let mu2 = median(done.iter().filter_map(|r| r.mu_hat.map(|m| m[1])).collect());
    let q2 = median(done.iter().filter_map(|r| r.q2_peak_over_b).collect());
    let high_variance = runs.iter().any(|r| r.high_variance);
    let fluid = runs.first().map(|r| &r.fluid);
    let gate = |ok: Option<bool>| {
        if high_variance || done.len() < runs.len() {
            None
        } else {
            ok
        }
    };
    let t1_ok = gate(e1.map(|e| e < tolerance.t1_relative));
    let mu2_ok = gate(
        mu2.zip(fluid)
            .map(|(m, f)| (m - f.mu[1]).abs() <= tolerance.mu2_absolute),
    );
    let q2_ok = gate(
        q2.zip(fluid)
            .map(|(q, f)| (q - f.q2_peak / f.b).abs() <= tolerance.q2_over_b_absolute),
    );
    let passed = match (t1_ok, mu2_ok, q2_ok) {
        (Some(a), Some(b), Some(c)) => Some(a && b && c),
        _ => None,
    };
    BurstSummary {
        runs: runs.len(),
        completed: done.len(),
        median_abs_err_t1: e1,
        median_mu2_hat: mu2,
        median_q2_peak_over_b: q2,
        high_variance,
        t1_ok,
        mu2_ok,
        q2_ok,
        passed,
    }
}

/// Runs one burst per seed on the current rayon pool, in seed order.
pub fn run_bursts(
    arrivals: &[ArrivalSpec],
    b: u64,
    seeds: &[u64],
    tolerance: &BurstTolerance,
) -> Result<Vec<BurstComparison>> {
    let limit = default_slot_limit(b);
    seeds
        .par_iter()
        .map(|&s| compare_to_simulation(arrivals, b, s, tolerance, limit))
        .collect()
}

/// CSV with columns `seed,t1_hat,err_t1,mu2_hat,err_mu2,q2_peak_over_b`;
/// missing values are empty.
pub fn write_burst_csv<W: Write>(out: W, runs: &[BurstComparison]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "seed",
        "t1_hat",
        "err_t1",
        "mu2_hat",
        "err_mu2",
        "q2_peak_over_b",
    ])?;
    let f = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    for r in runs {
        w.write_record([
            r.seed.to_string(),
            r.t1_hat.map(|t| t.to_string()).unwrap_or_default(),
            f(r.err_t1),
            f(r.mu_hat.map(|m| m[1])),
            f(r.err_mu2),
            f(r.q2_peak_over_b),
        ])?;
    }
    w.flush()?;
    Ok(())
}
