//! Per-file FCFS bookkeeping.
//!
//! A file is the batch that lands on one queue in one slot. Its delay runs
//! from the slot after arrival until the slot in which its last packet is
//! removed, so a file arriving in slot `t` and finishing in slot `t'` has
//! delay `t' - t ≥ 1`.

use std::collections::VecDeque;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::StepRecord;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    pub queue: usize,
    /// Arrival ordinal within the queue, starting at 1.
    pub k: u64,
    pub arrival_slot: u64,
    pub size: u64,
    pub completion_slot: Option<u64>,
    pub delay: Option<u64>,
}

/// Completed files of one queue, in completion order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DelaySeries {
    pub files: Vec<FileRecord>,
}

impl DelaySeries {
    pub fn delays(&self) -> Vec<u64> {
        self.files.iter().filter_map(|f| f.delay).collect()
    }

    pub fn len(&self) -> usize {
        self.files.len()
    }

    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }
}

#[derive(Debug, Clone)]
struct OpenFile {
    k: u64,
    arrival_slot: u64,
    size: u64,
    remaining: u64,
    /// False for the backlog present at the start, which has no arrival slot.
    tracked: bool,
}

#[derive(Debug, Clone, Default)]
struct QueueFiles {
    open: VecDeque<OpenFile>,
    next_k: u64,
    arrived_packets: u64,
    completed_packets: u64,
    open_packets: u64,
}

/// Consumes step records in slot order and produces file delays.
#[derive(Debug, Clone)]
pub struct DelayTracker {
    queues: Vec<QueueFiles>,
    next_slot: u64,
    series: Option<Vec<DelaySeries>>,
}

impl DelayTracker {
    /// Tracker for an initially empty system whose first record is slot 0.
    /// Completed files are retained and available through [`Self::delays`].
    pub fn new(num_queues: usize) -> Self {
        Self::with_backlog(&vec![0; num_queues], 0, true)
    }

    /// Tracker that only forwards completions to a sink (see
    /// [`Self::on_step_with`]) without retaining them.
    pub fn streaming(initial_lengths: &[u64]) -> Self {
        Self::with_backlog(initial_lengths, 0, false)
    }

    /// Tracker starting at `first_slot` with an untracked backlog; backlog
    /// packets are served first and never produce a file record.
    pub fn with_backlog(initial_lengths: &[u64], first_slot: u64, retain: bool) -> Self {
        let queues = initial_lengths
            .iter()
            .map(|&q| {
                let mut files = QueueFiles {
                    next_k: 1,
                    open_packets: q,
                    ..Default::default()
                };
                if q > 0 {
                    files.open.push_back(OpenFile {
                        k: 0,
                        arrival_slot: first_slot,
                        size: q,
                        remaining: q,
                        tracked: false,
                    });
                }
                files
            })
            .collect::<Vec<_>>();
        let series = retain.then(|| vec![DelaySeries::default(); queues.len()]);
        Self {
            queues,
            next_slot: first_slot,
            series,
        }
    }

    pub fn num_queues(&self) -> usize {
        self.queues.len()
    }

    /// Retains completed files.
    pub fn on_step(&mut self, record: &StepRecord) -> Result<()> {
        self.on_step_with(record, |_| {})
    }

    /// Processes one slot, passing every file completed in it to `sink`.
    pub fn on_step_with<F: FnMut(&FileRecord)>(
        &mut self,
        record: &StepRecord,
        mut sink: F,
    ) -> Result<()> {
        if record.slot != self.next_slot {
            return Err(Error::OutOfOrder {
                expected: self.next_slot,
                got: record.slot,
            });
        }
        if record.num_queues() != self.queues.len() {
            return Err(Error::Dimension {
                expected: self.queues.len(),
                got: record.num_queues(),
            });
        }
        for (i, files) in self.queues.iter_mut().enumerate() {
            if record.served[i] == 1 {
                let front = files.open.front_mut().ok_or_else(|| {
                    Error::Precondition(format!(
                        "slot {}: removal from queue {} with no open file",
                        record.slot,
                        i + 1
                    ))
                })?;
                front.remaining -= 1;
                files.open_packets -= 1;
                if front.remaining == 0 {
                    let done = files.open.pop_front().expect("front exists");
                    if done.tracked {
                        let delay = record.slot - done.arrival_slot;
                        debug_assert!(delay >= 1, "file served in its own arrival slot");
                        files.completed_packets += done.size;
                        let rec = FileRecord {
                            queue: i,
                            k: done.k,
                            arrival_slot: done.arrival_slot,
                            size: done.size,
                            completion_slot: Some(record.slot),
                            delay: Some(delay),
                        };
                        sink(&rec);
                        if let Some(series) = self.series.as_mut() {
                            series[i].files.push(rec);
                        }
                    }
                }
            }
            let a = record.arrivals[i];
            if a > 0 {
                files.open.push_back(OpenFile {
                    k: files.next_k,
                    arrival_slot: record.slot,
                    size: a,
                    remaining: a,
                    tracked: true,
                });
                files.next_k += 1;
                files.arrived_packets += a;
                files.open_packets += a;
            }
        }
        self.next_slot += 1;
        Ok(())
    }

    /// Completed files of `queue` (empty when the tracker does not retain).
    pub fn delays(&self, queue: usize) -> &DelaySeries {
        static EMPTY: DelaySeries = DelaySeries { files: Vec::new() };
        self.series.as_ref().map_or(&EMPTY, |s| &s[queue])
    }

    /// Files still in the queue, oldest first.
    pub fn open_files(&self, queue: usize) -> Vec<FileRecord> {
        self.queues[queue]
            .open
            .iter()
            .filter(|f| f.tracked)
            .map(|f| FileRecord {
                queue,
                k: f.k,
                arrival_slot: f.arrival_slot,
                size: f.size,
                completion_slot: None,
                delay: None,
            })
            .collect()
    }

    /// `(arrived, completed, open)` packet counts for tracked files of `queue`;
    /// `open` includes any untracked backlog.
    pub fn packet_counts(&self, queue: usize) -> (u64, u64, u64) {
        let q = &self.queues[queue];
        (q.arrived_packets, q.completed_packets, q.open_packets)
    }
}

/// Writes completed files as CSV: `queue,k,arrival_slot,size,delay`, with
/// 1-based queue numbers.
pub struct DelayCsvWriter<W: Write> {
    out: W,
}

impl<W: Write> DelayCsvWriter<W> {
    pub fn new(mut out: W) -> Result<Self> {
        writeln!(out, "queue,k,arrival_slot,size,delay")?;
        Ok(Self { out })
    }

    pub fn write(&mut self, f: &FileRecord) -> Result<()> {
        let delay = f.delay.map(|d| d.to_string()).unwrap_or_default();
        writeln!(
            self.out,
            "{},{},{},{},{}",
            f.queue + 1,
            f.k,
            f.arrival_slot,
            f.size,
            delay
        )?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}
