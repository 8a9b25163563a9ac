//! Discrete-time M/GI/1 workload bench.
//!
//! `W(t+1) = [W(t) + B(t)·S_t − 1]⁺` with `B(t)` Bernoulli(`p`) customer
//! arrivals and service requirements `S_t` from any arrival law. Mean
//! workload is sampled on a half-decade ladder and its growth exponent fitted
//! on a log-log scale.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arrivals::{ArrivalSampler, ArrivalSpec};
use crate::error::{Error, Result};
use crate::estimators::stats::{fit_line, Z95};
use crate::report::fmt_f64;
use crate::rng::{StreamRng, StreamRole};

pub const MIN_FIT_POINTS: usize = 5;
/// Fitted exponents at or below this count as saturation.
pub const SATURATION_BETA: f64 = 0.05;
/// Slack added to `1/(1+γ)` in the pass check.
pub const BETA_SLACK: f64 = 0.1;

/// Points `round(10^{k/2})` for `k = 6, 7, ...` not above `horizon`; just
/// `[horizon]` when `horizon < 1000`.
pub fn half_decade_ladder(horizon: u64) -> Vec<u64> {
    let mut out: Vec<u64> = (6..)
        .map(|k| 10f64.powf(k as f64 / 2.0).round() as u64)
        .take_while(|&t| t <= horizon)
        .collect();
    if out.is_empty() && horizon > 0 {
        out.push(horizon);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mg1Params {
    /// Customer arrival probability per slot.
    pub p: f64,
    pub service: ArrivalSpec,
    pub horizon: u64,
    pub replications: u32,
    pub seed: u64,
}

impl Mg1Params {
    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.p <= 1.0) {
            return Err(Error::config(format!(
                "customer probability {} outside (0, 1]",
                self.p
            )));
        }
        let load = self.p * self.service.declared_mean();
        if !(load < 1.0) {
            return Err(Error::config(format!(
                "unstable workload queue: load p·E[S] = {load} is not below 1"
            )));
        }
        if self.horizon == 0 || self.replications == 0 {
            return Err(Error::config("horizon and replications must be positive"));
        }
        Ok(())
    }
}

/// Bench configuration as read by the command line; every field has a
/// default (the heavy-tailed bench at load 0.2).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Mg1Config {
    pub p: f64,
    pub service: ArrivalSpec,
    pub horizon: u64,
    pub replications: u32,
    pub seed: u64,
    pub gamma: f64,
}

impl Default for Mg1Config {
    fn default() -> Self {
        let service = ArrivalSpec::bernoulli_zeta(1.0, 2.5).expect("valid law");
        Self {
            p: 0.2 / service.declared_mean(),
            service,
            horizon: 10_000_000,
            replications: 200,
            seed: 1,
            gamma: 0.45,
        }
    }
}

impl Mg1Config {
    pub fn params(&self) -> Mg1Params {
        Mg1Params {
            p: self.p,
            service: self.service.clone(),
            horizon: self.horizon,
            replications: self.replications,
            seed: self.seed,
        }
    }

    /// SHA-256 of the compact JSON serialization, hex-encoded.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        hex::encode(Sha256::digest(
            serde_json::to_vec(self).expect("config serializes"),
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadTrace {
    pub slots: Vec<u64>,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub replications: u32,
}

impl WorkloadTrace {
    /// CSV with columns `t,mean_W,stderr,replications`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "mean_W", "stderr", "replications"])?;
        for i in 0..self.slots.len() {
            w.write_record([
                self.slots[i].to_string(),
                fmt_f64(self.mean[i]),
                fmt_f64(self.stderr[i]),
                self.replications.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// One workload path. Customer slots are drawn as geometric gaps, so slots
/// without a customer cost nothing; the draws depend only on the seed and
/// replication, never on `W`.
struct Path {
    sampler: ArrivalSampler,
    /// `1 / ln(1 − p)`, or 0 when every slot has a customer.
    inv_log_q: f64,
    customers: StreamRng,
    service: StreamRng,
    /// Slots simulated so far.
    t: u64,
    /// Slot of the next customer.
    next: u64,
    w: u64,
}

/// Slots without a customer before the next one: geometric on `{0, 1, ...}`
/// by inversion.
#[inline]
fn gap(rng: &mut StreamRng, inv_log_q: f64) -> u64 {
    let g = (rng.unit_open_zero().ln() * inv_log_q).floor();
    if g >= u64::MAX as f64 {
        u64::MAX
    } else {
        g as u64
    }
}

impl Path {
    fn new(params: &Mg1Params, replication: u32, w0: u64) -> Self {
        let inv_log_q = if params.p < 1.0 {
            1.0 / (-params.p).ln_1p()
        } else {
            0.0
        };
        let mut customers = StreamRng::for_role(params.seed, replication, StreamRole::Customers);
        let next = gap(&mut customers, inv_log_q);
        Self {
            sampler: params.service.sampler(),
            inv_log_q,
            customers,
            service: StreamRng::for_role(params.seed, replication, StreamRole::Service),
            t: 0,
            next,
            w: w0,
        }
    }

    /// Runs slots until `t = target`.
    fn advance_to(&mut self, target: u64) {
        while self.next < target {
            self.w = self.w.saturating_sub(self.next - self.t);
            let s = self.sampler.sample(&mut self.service);
            self.w = (self.w + s).saturating_sub(1);
            self.t = self.next + 1;
            self.next = self
                .t
                .saturating_add(gap(&mut self.customers, self.inv_log_q));
        }
        if target > self.t {
            self.w = self.w.saturating_sub(target - self.t);
            self.t = target;
        }
    }
}

/// One replication's workload path `W(1), ..., W(horizon)` from `W(0) = w0`.
/// Paths with the same seed and replication share their randomness whatever
/// `w0` is.
pub fn workload_path(params: &Mg1Params, replication: u32, w0: u64) -> Result<Vec<u64>> {
    params.validate()?;
    let mut path = Path::new(params, replication, w0);
    Ok((1..=params.horizon)
        .map(|t| {
            path.advance_to(t);
            path.w
        })
        .collect())
}

fn replication_samples(params: &Mg1Params, ladder: &[u64], replication: u32) -> Vec<u64> {
    let mut path = Path::new(params, replication, 0);
    ladder
        .iter()
        .map(|&t| {
            path.advance_to(t);
            path.w
        })
        .collect()
}

/// Mean workload over `replications` paths started empty, on
/// [`half_decade_ladder`]`(horizon)`. Replications run on the current rayon
/// pool and are combined in replication order.
pub fn simulate_workload(params: &Mg1Params) -> Result<WorkloadTrace> {
    params.validate()?;
    let ladder = half_decade_ladder(params.horizon);
    let samples: Vec<Vec<u64>> = (0..params.replications)
        .into_par_iter()
        .map(|r| replication_samples(params, &ladder, r))
        .collect();
    let n = f64::from(params.replications);
    let mut mean = vec![0.0; ladder.len()];
    let mut stderr = vec![f64::NAN; ladder.len()];
    for (j, m) in mean.iter_mut().enumerate() {
        let col: Vec<f64> = samples.iter().map(|s| s[j] as f64).collect();
        *m = col.iter().sum::<f64>() / n;
        if params.replications > 1 {
            let var = col.iter().map(|v| (v - *m).powi(2)).sum::<f64>() / (n - 1.0);
            stderr[j] = (var / n).sqrt();
        }
    }
    Ok(WorkloadTrace {
        slots: ladder,
        mean,
        stderr,
        replications: params.replications,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    /// `None` when the trace saturates.
    pub beta: Option<f64>,
    /// Raw fitted slope, also for saturated traces.
    pub fitted_slope: Option<f64>,
    pub beta_ci: Option<(f64, f64)>,
    pub r_squared: Option<f64>,
    pub gamma: f64,
    /// `1 / (1 + γ)`.
    pub bound: f64,
    pub fit_points: usize,
    pub saturated: bool,
    pub passed: bool,
}

/// Fits `ln Ê[W(t)]` on `ln t` over the top half of the ladder.
pub fn fit_scaling(trace: &WorkloadTrace, gamma: f64) -> Result<ScalingReport> {
    let l = trace.slots.len();
    if l < MIN_FIT_POINTS {
        return Err(Error::Precondition(format!(
            "scaling fit needs at least {MIN_FIT_POINTS} ladder points, got {l}"
        )));
    }
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::domain(format!(
            "gamma must be positive, got {gamma}"
        )));
    }
    let bound = 1.0 / (1.0 + gamma);
    let top = l / 2..l;
    let mut report = ScalingReport {
        beta: None,
        fitted_slope: None,
        beta_ci: None,
        r_squared: None,
        gamma,
        bound,
        fit_points: top.len(),
        saturated: true,
        passed: false,
    };
    if trace.mean[top.clone()].iter().any(|&m| !(m > 0.0)) {
        return Ok(report);
    }
    let x: Vec<f64> = trace.slots[top.clone()]
        .iter()
        .map(|&t| (t as f64).ln())
        .collect();
    let y: Vec<f64> = trace.mean[top].iter().map(|m| m.ln()).collect();
    let fit = fit_line(&x, &y).ok_or_else(|| Error::Precondition("degenerate ladder".into()))?;
    report.fitted_slope = Some(fit.slope);
    report.r_squared = Some(fit.r_squared);
    report.saturated = fit.slope <= SATURATION_BETA;
    if !report.saturated {
        report.beta = Some(fit.slope);
        report.beta_ci = Some((
            fit.slope - Z95 * fit.slope_se,
            fit.slope + Z95 * fit.slope_se,
        ));
        report.passed = fit.slope <= bound + BETA_SLACK;
    }
    Ok(report)
}
