//! Replication driver: Max-Weight selection, arrival sampling and the
//! slot update, repeated over a horizon.

use std::io::Write;

use sha2::{Digest, Sha256};

use crate::arrivals::{ArrivalSampler, ArrivalSpec};
use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::network::{apply_step, select_unchecked, QueueState, ScheduleSet, StepRecord};
use crate::rng::{StreamRng, StreamRole};

/// One replication of the switched network.
///
/// Holds a reusable [`StepRecord`] so that long runs do not allocate per
/// slot; [`Simulator::advance`] returns a view of it.
#[derive(Debug, Clone)]
pub struct Simulator {
    set: ScheduleSet,
    samplers: Vec<ArrivalSampler>,
    arrival_rngs: Vec<StreamRng>,
    scheduler_rng: StreamRng,
    lengths: Vec<u64>,
    slot: u64,
    record: StepRecord,
}

impl Simulator {
    pub fn new(
        set: ScheduleSet,
        arrivals: &[ArrivalSpec],
        initial_lengths: Vec<u64>,
        seed: u64,
        replication: u32,
    ) -> Result<Self> {
        let n = set.num_queues();
        if arrivals.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: arrivals.len(),
            });
        }
        if initial_lengths.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: initial_lengths.len(),
            });
        }
        Ok(Self {
            samplers: arrivals.iter().map(ArrivalSpec::sampler).collect(),
            arrival_rngs: (0..n as u32)
                .map(|i| StreamRng::for_role(seed, replication, StreamRole::Arrivals(i)))
                .collect(),
            scheduler_rng: StreamRng::for_role(seed, replication, StreamRole::Scheduler),
            lengths: initial_lengths,
            slot: 0,
            record: StepRecord::zeroed(n),
            set,
        })
    }

    pub fn from_config(config: &SimConfig, replication: u32) -> Result<Self> {
        config.validate()?;
        Self::new(
            config.schedules.clone(),
            &config.arrivals,
            config.initial_state(),
            config.seed,
            replication,
        )
    }

    /// Same as [`Simulator::from_config`] with a different start state.
    pub fn from_config_with_start(
        config: &SimConfig,
        replication: u32,
        start: Vec<u64>,
    ) -> Result<Self> {
        config.validate()?;
        Self::new(
            config.schedules.clone(),
            &config.arrivals,
            start,
            config.seed,
            replication,
        )
    }

    pub fn num_queues(&self) -> usize {
        self.lengths.len()
    }

    pub fn lengths(&self) -> &[u64] {
        &self.lengths
    }

    pub fn slot(&self) -> u64 {
        self.slot
    }

    pub fn state(&self) -> QueueState {
        QueueState {
            lengths: self.lengths.clone(),
            slot: self.slot,
        }
    }

    pub fn schedule_set(&self) -> &ScheduleSet {
        &self.set
    }

    /// Runs one slot with sampled arrivals.
    #[inline]
    pub fn advance(&mut self) -> &StepRecord {
        let idx = select_unchecked(&self.lengths, &self.set, &mut self.scheduler_rng);
        for i in 0..self.lengths.len() {
            self.record.arrivals[i] = self.samplers[i].sample(&mut self.arrival_rngs[i]);
        }
        self.finish_slot(idx)
    }

    /// Runs one slot with the given arrivals instead of sampled ones. The
    /// arrival streams are not advanced.
    pub fn advance_with_arrivals(&mut self, arrivals: &[u64]) -> Result<&StepRecord> {
        if arrivals.len() != self.lengths.len() {
            return Err(Error::Dimension {
                expected: self.lengths.len(),
                got: arrivals.len(),
            });
        }
        let idx = select_unchecked(&self.lengths, &self.set, &mut self.scheduler_rng);
        self.record.arrivals.copy_from_slice(arrivals);
        Ok(self.finish_slot(idx))
    }

    #[inline]
    fn finish_slot(&mut self, idx: usize) -> &StepRecord {
        self.record.slot = self.slot;
        self.record.schedule_index = idx;
        self.record.pre_lengths.copy_from_slice(&self.lengths);
        apply_step(&mut self.record, self.set.get(idx));
        self.lengths.copy_from_slice(&self.record.post_lengths);
        self.slot += 1;
        &self.record
    }
}

/// Iterator over the `horizon` step records of one replication.
#[derive(Debug, Clone)]
pub struct Trace {
    sim: Simulator,
    remaining: u64,
}

impl Iterator for Trace {
    type Item = StepRecord;

    fn next(&mut self) -> Option<StepRecord> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        Some(self.sim.advance().clone())
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = usize::try_from(self.remaining).unwrap_or(usize::MAX);
        (n, Some(n))
    }
}

/// Step records for replication `replication` of `config`.
pub fn run(config: &SimConfig, horizon: u64, replication: u32) -> Result<Trace> {
    if horizon == 0 {
        return Err(Error::config("horizon must be at least 1"));
    }
    Ok(Trace {
        sim: Simulator::from_config(config, replication)?,
        remaining: horizon,
    })
}

/// Writes step records as CSV: `slot, a1..aN, sched_idx, s1..sN, q1..qN`
/// where `s` are actual removals and `q` the lengths after the slot.
pub struct TraceCsvWriter<W: Write> {
    out: W,
    line: String,
}

impl<W: Write> TraceCsvWriter<W> {
    pub fn new(mut out: W, num_queues: usize) -> Result<Self> {
        let mut header = vec!["slot".to_string()];
        header.extend((1..=num_queues).map(|i| format!("a{i}")));
        header.push("sched_idx".into());
        header.extend((1..=num_queues).map(|i| format!("s{i}")));
        header.extend((1..=num_queues).map(|i| format!("q{i}")));
        writeln!(out, "{}", header.join(","))?;
        Ok(Self {
            out,
            line: String::new(),
        })
    }

    pub fn write(&mut self, rec: &StepRecord) -> Result<()> {
        use std::fmt::Write as _;
        self.line.clear();
        let _ = write!(self.line, "{}", rec.slot);
        for a in &rec.arrivals {
            let _ = write!(self.line, ",{a}");
        }
        let _ = write!(self.line, ",{}", rec.schedule_index);
        for s in &rec.served {
            let _ = write!(self.line, ",{s}");
        }
        for q in &rec.post_lengths {
            let _ = write!(self.line, ",{q}");
        }
        self.line.push('\n');
        self.out.write_all(self.line.as_bytes())?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

/// SHA-256 over the CSV encoding of a trace.
pub fn trace_digest<I: IntoIterator<Item = StepRecord>>(
    records: I,
    num_queues: usize,
) -> Result<String> {
    struct HashWriter(Sha256);
    impl Write for HashWriter {
        fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
            self.0.update(buf);
            Ok(buf.len())
        }
        fn flush(&mut self) -> std::io::Result<()> {
            Ok(())
        }
    }
    let mut w = TraceCsvWriter::new(HashWriter(Sha256::new()), num_queues)?;
    for rec in records {
        w.write(&rec)?;
    }
    Ok(hex::encode(w.finish()?.0.finalize()))
}
