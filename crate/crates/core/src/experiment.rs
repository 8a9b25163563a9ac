//! Replication runner: drives simulations, feeds the estimators and merges
//! replications in a fixed order.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use rayon::prelude::*;

use crate::config::SimConfig;
use crate::delay::{DelayCsvWriter, DelayTracker};
use crate::error::{Error, Result};
use crate::estimators::{DriftAccumulator, RenewalLedger, RenewalSummary, ValueHistogram};
use crate::sim::{Simulator, TraceCsvWriter};

/// Replication indices at or above this value identify dedicated drift-probe
/// runs, so their random streams never coincide with a main replication's.
pub const DRIFT_REPLICATION_BASE: u32 = 1 << 31;

/// Everything one replication contributes to a report.
#[derive(Debug, Clone)]
pub struct ReplicationOutput {
    pub replication: u32,
    pub renewal: RenewalSummary,
    /// Per-queue marginal of `Q_i(t)` over all slots.
    pub queue_hist: Vec<ValueHistogram>,
    /// Per-queue histogram of completed file delays.
    pub delay_hist: Vec<ValueHistogram>,
    pub drift: Option<DriftAccumulator>,
    pub final_lengths: Vec<u64>,
}

/// Merged result over all replications, in replication order.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub replications: u32,
    pub renewal: RenewalSummary,
    pub queue_hist: Vec<ValueHistogram>,
    pub delay_hist: Vec<ValueHistogram>,
    pub drift: Option<DriftAccumulator>,
}

/// Optional per-replication CSV destinations.
#[derive(Debug, Clone, Default)]
pub struct CsvOutputs {
    pub trace: Option<std::path::PathBuf>,
    pub delay: Option<std::path::PathBuf>,
}

impl CsvOutputs {
    /// Paths `trace_rep{r}.csv` and `delays_rep{r}.csv` under `dir`, as
    /// enabled in `config.outputs`.
    pub fn for_replication(config: &SimConfig, dir: &Path, replication: u32) -> Self {
        Self {
            trace: config
                .outputs
                .trace_csv
                .then(|| dir.join(format!("trace_rep{replication}.csv"))),
            delay: config
                .outputs
                .delay_csv
                .then(|| dir.join(format!("delays_rep{replication}.csv"))),
        }
    }
}

/// Runs replication `replication` of `config` for `config.horizon` slots.
///
/// The drift probe runs on this trace only when `probes.drift_t` is set and
/// no dedicated start state is configured.
pub fn run_replication(
    config: &SimConfig,
    replication: u32,
    csv: &CsvOutputs,
) -> Result<ReplicationOutput> {
    config.validate()?;
    let n = config.num_queues;
    let mut sim = Simulator::from_config(config, replication)?;
    let initial = config.initial_state();
    let mut tracker = DelayTracker::streaming(&initial);
    let mut ledger = RenewalLedger::new(n, &config.probes.truncation_ladder)?;
    let mut queue_hist = vec![ValueHistogram::new(); n];
    let mut delay_hist = vec![ValueHistogram::new(); n];
    let mut drift = match (config.probes.drift_t, &config.probes.drift_initial_lengths) {
        (Some(t), None) => Some(DriftAccumulator::new(t)?),
        _ => None,
    };
    let mut trace_w = match &csv.trace {
        Some(p) => Some(TraceCsvWriter::new(BufWriter::new(File::create(p)?), n)?),
        None => None,
    };
    let mut delay_w = match &csv.delay {
        Some(p) => Some(DelayCsvWriter::new(BufWriter::new(File::create(p)?))?),
        None => None,
    };
    let tail = config.probes.tail;
    let mut sink_err: Option<Error> = None;

    for _ in 0..config.horizon {
        let rec = sim.advance();
        ledger.observe_step(rec)?;
        if tail {
            for (h, &q) in queue_hist.iter_mut().zip(&rec.pre_lengths) {
                h.push(q);
            }
        }
        if let Some(d) = drift.as_mut() {
            d.observe_step(rec)?;
        }
        if let Some(w) = trace_w.as_mut() {
            w.write(rec)?;
        }
        tracker.on_step_with(rec, |f| {
            let delay = f.delay.expect("completed file has a delay");
            ledger.observe_completion(f.queue, delay);
            if tail {
                delay_hist[f.queue].push(delay);
            }
            if let Some(w) = delay_w.as_mut() {
                if let Err(e) = w.write(f) {
                    sink_err.get_or_insert(e);
                }
            }
        })?;
        if let Some(e) = sink_err.take() {
            return Err(e);
        }
    }
    if let Some(d) = drift.as_mut() {
        d.end_trace(config.horizon);
    }
    if let Some(w) = trace_w {
        w.finish()?;
    }
    if let Some(w) = delay_w {
        w.finish()?;
    }
    Ok(ReplicationOutput {
        replication,
        renewal: ledger.finish(),
        queue_hist,
        delay_hist,
        drift,
        final_lengths: sim.lengths().to_vec(),
    })
}

/// Dedicated drift-probe run from `probes.drift_initial_lengths`.
pub fn run_drift_replication(config: &SimConfig, replication: u32) -> Result<DriftAccumulator> {
    config.validate()?;
    let (Some(t), Some(start)) = (
        config.probes.drift_t,
        config.probes.drift_initial_lengths.clone(),
    ) else {
        return Err(Error::config(
            "drift probe start state needs probes.drift_t and probes.drift_initial_lengths",
        ));
    };
    let mut sim =
        Simulator::from_config_with_start(config, DRIFT_REPLICATION_BASE + replication, start)?;
    let mut acc = DriftAccumulator::new(t)?;
    for _ in 0..config.horizon {
        acc.observe_step(sim.advance())?;
    }
    acc.end_trace(config.horizon);
    Ok(acc)
}

/// Runs all replications of `config` on `threads` workers (0 = rayon's
/// default) and merges them in replication order. Per-replication CSVs go to
/// `csv_dir` when given.
pub fn run_experiment(
    config: &SimConfig,
    threads: usize,
    csv_dir: Option<&Path>,
) -> Result<ExperimentOutput> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Precondition(format!("thread pool: {e}")))?;
    let dedicated_drift =
        config.probes.drift_t.is_some() && config.probes.drift_initial_lengths.is_some();
    let (outputs, drifts) = pool.install(|| {
        let outputs: Vec<Result<ReplicationOutput>> = (0..config.replications)
            .into_par_iter()
            .map(|r| {
                let csv = csv_dir
                    .map(|d| CsvOutputs::for_replication(config, d, r))
                    .unwrap_or_default();
                run_replication(config, r, &csv)
            })
            .collect();
        let drifts: Vec<Result<DriftAccumulator>> = if dedicated_drift {
            (0..config.replications)
                .into_par_iter()
                .map(|r| run_drift_replication(config, r))
                .collect()
        } else {
            Vec::new()
        };
        (outputs, drifts)
    });

    let mut it = outputs.into_iter();
    let first = it.next().expect("at least one replication")?;
    let mut merged = ExperimentOutput {
        replications: config.replications,
        renewal: first.renewal,
        queue_hist: first.queue_hist,
        delay_hist: first.delay_hist,
        drift: first.drift,
    };
    for out in it {
        let out = out?;
        merged.renewal.merge(out.renewal)?;
        for (a, b) in merged.queue_hist.iter_mut().zip(&out.queue_hist) {
            a.merge(b);
        }
        for (a, b) in merged.delay_hist.iter_mut().zip(&out.delay_hist) {
            a.merge(b);
        }
        if let (Some(a), Some(b)) = (merged.drift.as_mut(), out.drift) {
            a.merge(b)?;
        }
    }
    for d in drifts {
        let d = d?;
        match merged.drift.as_mut() {
            Some(a) => a.merge(d)?,
            None => merged.drift = Some(d),
        }
    }
    Ok(merged)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arrivals::ArrivalSpec;
    use crate::rng::{StreamRng, StreamRole};

    fn cfg() -> SimConfig {
        let mut c = SimConfig::three_queue(
            vec![
                ArrivalSpec::bernoulli(0.2).unwrap(),
                ArrivalSpec::bernoulli(0.4).unwrap(),
                ArrivalSpec::bernoulli(0.3).unwrap(),
            ],
            20_000,
            5,
        );
        c.replications = 3;
        c.probes.truncation_ladder = vec![1, 2, 4, 8];
        c.probes.drift_t = Some(2);
        c
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let c = cfg();
        let a = run_experiment(&c, 1, None).unwrap();
        let b = run_experiment(&c, 3, None).unwrap();
        assert_eq!(a.renewal, b.renewal);
        assert_eq!(a.queue_hist, b.queue_hist);
        assert_eq!(a.drift.unwrap().report(1), b.drift.unwrap().report(1));
    }

    #[test]
    fn histograms_cover_every_slot() {
        let out = run_experiment(&cfg(), 2, None).unwrap();
        assert_eq!(out.renewal.slots(), 60_000);
        assert!(out.queue_hist.iter().all(|h| h.total() == 60_000));
        let mut rng = StreamRng::for_role(1, 0, StreamRole::Bootstrap);
        let c = out.renewal.queue_curve(1, &mut rng);
        assert!(c.is_usable());
        assert!(c.estimates.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn csv_files_written_per_replication() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = cfg();
        c.horizon = 100;
        c.outputs.trace_csv = true;
        run_experiment(&c, 2, Some(dir.path())).unwrap();
        for r in 0..3 {
            let t = std::fs::read_to_string(dir.path().join(format!("trace_rep{r}.csv"))).unwrap();
            assert_eq!(t.lines().count(), 101);
            assert!(dir.path().join(format!("delays_rep{r}.csv")).exists());
        }
    }
}
