//! Report assembly for simulation runs and λ₂ sweeps.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::arrivals::calibrate_rate;
use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::estimators::{
    classify_divergence, tail_classify, Divergence, DivergenceReport, DriftProbeReport, TailReport,
    TruncatedMeanCurve,
};
use crate::experiment::{run_experiment, ExperimentOutput};
use crate::region::{classify, QueueVerdict, RegionVerdict};
use crate::report::fmt_f64;
use crate::rng::{StreamRng, StreamRole};

/// Replication index of the bootstrap stream behind report curves.
pub const REPORT_BOOTSTRAP_REPLICATION: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionStatus {
    Stable,
    Unstable,
    /// No analytic verdict for this system.
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueAnalysis {
    /// 1-based.
    pub queue: usize,
    pub queue_curve: TruncatedMeanCurve,
    pub queue_divergence: DivergenceReport,
    pub delay_curve: TruncatedMeanCurve,
    pub delay_divergence: DivergenceReport,
    pub queue_tail: Option<TailReport>,
    pub delay_tail: Option<TailReport>,
    pub completed_files: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenewalStats {
    pub renewals: u64,
    pub cycles: u64,
    pub slots: u64,
    pub first_renewal: Option<u64>,
    pub last_renewal: Option<u64>,
    pub mean_cycle_length: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub config_digest: String,
    pub seed: u64,
    pub horizon: u64,
    pub replications: u32,
    pub rates: Vec<f64>,
    pub region_status: RegionStatus,
    pub region: Option<RegionVerdict>,
    pub renewal: RenewalStats,
    pub queues: Vec<QueueAnalysis>,
    pub drift: Option<DriftProbeReport>,
    /// Divergence and tail verdicts are finite-sample heuristics.
    pub heuristic: bool,
}

/// Analytic verdict for three-queue systems with the default schedules.
pub fn region_of(config: &SimConfig) -> (RegionStatus, Option<RegionVerdict>) {
    if config.num_queues != 3 || !config.schedules.is_three_queue_default() {
        return (RegionStatus::Unknown, None);
    }
    match classify(&config.rates(), 1) {
        Ok(v) if v.stable => (RegionStatus::Stable, Some(v)),
        Ok(v) => (RegionStatus::Unstable, Some(v)),
        Err(_) => (RegionStatus::Unknown, None),
    }
}

pub fn build_report(config: &SimConfig, out: &ExperimentOutput) -> SimulationReport {
    let mut rng = StreamRng::for_role(
        config.seed,
        REPORT_BOOTSTRAP_REPLICATION,
        StreamRole::Bootstrap,
    );
    let queues = (0..config.num_queues)
        .map(|q| {
            let queue_curve = out.renewal.queue_curve(q, &mut rng);
            let delay_curve = out.renewal.delay_curve(q, &mut rng);
            let tail = config.probes.tail;
            QueueAnalysis {
                queue: q + 1,
                queue_divergence: classify_divergence(&queue_curve),
                delay_divergence: classify_divergence(&delay_curve),
                queue_curve,
                delay_curve,
                queue_tail: tail.then(|| tail_classify(&out.queue_hist[q])),
                delay_tail: tail.then(|| tail_classify(&out.delay_hist[q])),
                completed_files: out.delay_hist[q].total(),
            }
        })
        .collect();
    let (region_status, region) = region_of(config);
    let r = &out.renewal;
    SimulationReport {
        config_digest: config.digest(),
        seed: config.seed,
        horizon: config.horizon,
        replications: config.replications,
        rates: config.rates(),
        region_status,
        region,
        renewal: RenewalStats {
            renewals: r.renewals(),
            cycles: r.cycles(),
            slots: r.slots(),
            first_renewal: r.first_renewal(),
            last_renewal: r.last_renewal(),
            mean_cycle_length: r.mean_cycle_length(),
        },
        queues,
        drift: out.drift.as_ref().map(|d| d.report(config.seed)),
        heuristic: true,
    }
}

/// One λ₂ grid point of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub lambda2: f64,
    /// Queue-2 verdict, or `outside_stability_region`.
    pub analytic_verdict: String,
    /// Queue-2 truncated-mean classification mapped to a delay verdict;
    /// `None` when the point was not simulated.
    pub empirical_verdict: Option<String>,
    pub divergence: Option<DivergenceReport>,
    pub drift: Option<DriftProbeReport>,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub config_digest: String,
    pub seed: u64,
    pub points: Vec<SweepPoint>,
}

fn verdict_name(v: QueueVerdict) -> &'static str {
    match v {
        QueueVerdict::DelayStable => "delay_stable",
        QueueVerdict::DelayUnstable => "delay_unstable",
        QueueVerdict::Boundary => "boundary",
        QueueVerdict::NotApplicable => "not_applicable",
    }
}

fn empirical_name(d: Divergence) -> &'static str {
    match d {
        Divergence::Finite => "delay_stable",
        Divergence::Diverging => "delay_unstable",
        Divergence::Inconclusive => "inconclusive",
    }
}

/// Copy of `base` with queue 2's arrival law recalibrated to mean `lambda2`
/// within its family.
pub fn with_lambda2(base: &SimConfig, lambda2: f64) -> Result<SimConfig> {
    if base.num_queues != 3 {
        return Err(Error::config("sweeps need the three-queue system"));
    }
    let family = base.arrivals[1].family().ok_or_else(|| {
        Error::config("queue 2 has a deterministic pattern; it cannot be recalibrated")
    })?;
    let mut cfg = base.clone();
    cfg.arrivals[1] = calibrate_rate(lambda2, family)?;
    Ok(cfg)
}

/// Simulates every grid point inside the stability region; points outside
/// are flagged and skipped.
pub fn run_sweep(base: &SimConfig, grid: &[f64], threads: usize) -> Result<SweepReport> {
    base.validate()?;
    let mut points = Vec::with_capacity(grid.len());
    for &lambda2 in grid {
        let cfg = with_lambda2(base, lambda2)?;
        let verdict = classify(&cfg.rates(), 1)?;
        if !verdict.stable {
            points.push(SweepPoint {
                lambda2,
                analytic_verdict: "outside_stability_region".into(),
                empirical_verdict: None,
                divergence: None,
                drift: None,
                flagged: true,
            });
            continue;
        }
        let out = run_experiment(&cfg, threads, None)?;
        let mut rng = StreamRng::for_role(
            cfg.seed,
            REPORT_BOOTSTRAP_REPLICATION,
            StreamRole::Bootstrap,
        );
        let divergence = classify_divergence(&out.renewal.queue_curve(1, &mut rng));
        points.push(SweepPoint {
            lambda2,
            analytic_verdict: verdict_name(verdict.queue_verdicts[1]).into(),
            empirical_verdict: Some(empirical_name(divergence.verdict).into()),
            divergence: Some(divergence),
            drift: out.drift.as_ref().map(|d| d.report(cfg.seed)),
            flagged: false,
        });
    }
    Ok(SweepReport {
        config_digest: base.digest(),
        seed: base.seed,
        points,
    })
}

/// CSV with columns
/// `lambda2,analytic_verdict,empirical_verdict,drift,drift_ci_lo,drift_ci_hi`.
pub fn write_sweep_csv<W: Write>(out: W, points: &[SweepPoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "lambda2",
        "analytic_verdict",
        "empirical_verdict",
        "drift",
        "drift_ci_lo",
        "drift_ci_hi",
    ])?;
    for p in points {
        let drift = p.drift.as_ref();
        let ci = drift.and_then(|d| d.ci);
        let f = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        w.write_record([
            fmt_f64(p.lambda2),
            p.analytic_verdict.clone(),
            p.empirical_verdict.clone().unwrap_or_default(),
            f(drift.and_then(|d| d.drift)),
            f(ci.map(|c| c.0)),
            f(ci.map(|c| c.1)),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arrivals::{ArrivalSpec, LawFamily};

    fn base() -> SimConfig {
        let mut c = SimConfig::three_queue(
            vec![
                calibrate_rate(0.2, LawFamily::BernoulliZeta { s: 2.5 }).unwrap(),
                ArrivalSpec::bernoulli(0.4).unwrap(),
                ArrivalSpec::bernoulli(0.3).unwrap(),
            ],
            5_000,
            3,
        );
        c.probes.truncation_ladder = vec![1, 2, 4, 8];
        c.probes.drift_t = Some(2);
        c
    }

    #[test]
    fn report_names_digest_seed_and_region() {
        let c = base();
        let out = run_experiment(&c, 1, None).unwrap();
        let r = build_report(&c, &out);
        assert_eq!(r.config_digest, c.digest());
        assert_eq!(r.seed, 3);
        assert_eq!(r.region_status, RegionStatus::Stable);
        assert_eq!(r.queues.len(), 3);
        assert!(r.drift.is_some());
    }

    #[test]
    fn unstable_rates_still_report() {
        let mut c = base();
        c.arrivals[2] = ArrivalSpec::bernoulli(0.9).unwrap();
        let out = run_experiment(&c, 1, None).unwrap();
        let r = build_report(&c, &out);
        assert_eq!(r.region_status, RegionStatus::Unstable);
        assert!(!r.region.unwrap().stable);
    }

    #[test]
    fn sweep_flags_unstable_points_and_keeps_order() {
        let s = run_sweep(&base(), &[0.3, 0.75], 1).unwrap();
        assert_eq!(s.points.len(), 2);
        assert_eq!(s.points[0].analytic_verdict, "delay_stable");
        assert!(s.points[0].empirical_verdict.is_some());
        assert!(s.points[1].flagged);
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, &s.points).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text
            .lines()
            .nth(2)
            .unwrap()
            .ends_with("outside_stability_region,,,,"));
    }

    #[test]
    fn empty_sweep_is_header_only() {
        let s = run_sweep(&base(), &[], 1).unwrap();
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, &s.points).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "lambda2,analytic_verdict,empirical_verdict,drift,drift_ci_lo,drift_ci_hi\n"
        );
    }
}
