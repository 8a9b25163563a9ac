//! Renewal-reward estimates of truncated means `E[min{X, M}]`.
//!
//! A renewal epoch is a slot in which every queue is empty. The slots between
//! two consecutive epochs form a cycle; cycles are IID, so the long-run mean
//! of a bounded reward is the ratio of the expected cycle reward to the
//! expected cycle length. The ledger accumulates, per cycle, the slot count,
//! `Σ min{Q_i(t), M}` for every queue and ladder level, and the same sums
//! over the delays of files completing within the cycle.
//!
//! Cycles are grouped into contiguous batches so memory stays bounded on long
//! runs; standard errors come from a bootstrap over batches.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::stats::{resample_counts, sample_std};
use crate::error::{Error, Result};
use crate::network::StepRecord;
use crate::rng::{StreamRng, StreamRole};

/// Minimum number of complete cycles for a conclusive curve.
pub const MIN_CYCLES: u64 = 30;
/// Bootstrap resamples per curve.
pub const BOOTSTRAP_RESAMPLES: usize = 200;
const MAX_BATCHES: usize = 2048;

#[derive(Debug, Clone, PartialEq, Eq)]
struct Aggregate {
    cycles: u64,
    slots: u64,
    /// `queue * L + level`
    q: Vec<u64>,
    files: Vec<u64>,
    /// `queue * L + level`
    d: Vec<u64>,
}

impl Aggregate {
    fn zero(num_queues: usize, levels: usize) -> Self {
        Self {
            cycles: 0,
            slots: 0,
            q: vec![0; num_queues * levels],
            files: vec![0; num_queues],
            d: vec![0; num_queues * levels],
        }
    }

    fn add(&mut self, other: &Aggregate) {
        self.cycles += other.cycles;
        self.slots += other.slots;
        for (a, b) in self.q.iter_mut().zip(&other.q) {
            *a += b;
        }
        for (a, b) in self.files.iter_mut().zip(&other.files) {
            *a += b;
        }
        for (a, b) in self.d.iter_mut().zip(&other.d) {
            *a += b;
        }
    }

    fn clear(&mut self) {
        self.cycles = 0;
        self.slots = 0;
        self.q.fill(0);
        self.files.fill(0);
        self.d.fill(0);
    }
}

/// What a [`TruncatedMeanCurve`] measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveQuantity {
    /// Queue length sampled every slot.
    QueueLength,
    /// Delay of each completed file.
    Delay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveStatus {
    Ok,
    /// Fewer than [`MIN_CYCLES`] complete cycles; estimates are reported but
    /// should not be trusted.
    TooFewCycles,
    /// No renewal epoch or no complete cycle; no estimate is produced.
    NoRenewals,
    /// Cycles exist but contain no files (delay curves only).
    NoSamples,
}

/// Truncated-mean estimates over a ladder of levels `M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncatedMeanCurve {
    pub quantity: CurveQuantity,
    /// Zero-based queue index.
    pub queue: usize,
    pub levels: Vec<u64>,
    /// Renewal-reward ratio per level; empty when no estimate exists.
    pub estimates: Vec<f64>,
    /// Batch-bootstrap standard errors, aligned with `estimates`.
    pub stderrs: Vec<f64>,
    /// Plain average over every slot (or every completed file).
    pub time_average: Vec<f64>,
    /// Bootstrap standard error of the log-log slope over the top half of
    /// the ladder, taken from the same resamples as `stderrs`.
    #[serde(default)]
    pub top_slope_se: Option<f64>,
    pub cycles: u64,
    pub status: CurveStatus,
}

impl TruncatedMeanCurve {
    pub fn is_usable(&self) -> bool {
        self.status == CurveStatus::Ok
    }

    /// `estimates.last / estimates.first`, if both exist and the first is positive.
    pub fn last_first_ratio(&self) -> Option<f64> {
        match (self.estimates.first(), self.estimates.last()) {
            (Some(&a), Some(&b)) if a > 0.0 => Some(b / a),
            _ => None,
        }
    }

    /// CSV with columns `M,estimate,stderr`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["M", "estimate", "stderr"])?;
        for (i, m) in self.levels.iter().enumerate() {
            let est = self
                .estimates
                .get(i)
                .map(|v| crate::report::fmt_f64(*v))
                .unwrap_or_default();
            let se = self
                .stderrs
                .get(i)
                .map(|v| crate::report::fmt_f64(*v))
                .unwrap_or_default();
            w.write_record([m.to_string(), est, se])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Streaming accumulator over one replication.
///
/// Feed every slot's queue lengths with [`RenewalLedger::observe_lengths`]
/// and every file completion with [`RenewalLedger::observe_completion`],
/// then call [`RenewalLedger::finish`].
#[derive(Debug, Clone)]
pub struct RenewalLedger {
    ladder: Vec<u64>,
    num_queues: usize,
    current: Aggregate,
    in_cycle: bool,
    pending: Aggregate,
    batch_size: u64,
    batches: Vec<Aggregate>,
    overall: Aggregate,
    renewals: u64,
    first_renewal: Option<u64>,
    last_renewal: Option<u64>,
    next_slot: Option<u64>,
}

impl RenewalLedger {
    pub fn new(num_queues: usize, ladder: &[u64]) -> Result<Self> {
        if num_queues == 0 {
            return Err(Error::config("ledger needs at least one queue"));
        }
        if ladder.is_empty() || ladder[0] == 0 || ladder.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config(
                "truncation ladder must be positive and strictly increasing",
            ));
        }
        let l = ladder.len();
        Ok(Self {
            ladder: ladder.to_vec(),
            num_queues,
            current: Aggregate::zero(num_queues, l),
            in_cycle: false,
            pending: Aggregate::zero(num_queues, l),
            batch_size: 1,
            batches: Vec::new(),
            overall: Aggregate::zero(num_queues, l),
            renewals: 0,
            first_renewal: None,
            last_renewal: None,
            next_slot: None,
        })
    }

    pub fn ladder(&self) -> &[u64] {
        &self.ladder
    }

    /// Records `Q(slot)`. Slots must be consecutive.
    pub fn observe_lengths(&mut self, slot: u64, lengths: &[u64]) -> Result<()> {
        if lengths.len() != self.num_queues {
            return Err(Error::Dimension {
                expected: self.num_queues,
                got: lengths.len(),
            });
        }
        if let Some(expected) = self.next_slot {
            if slot != expected {
                return Err(Error::OutOfOrder {
                    expected,
                    got: slot,
                });
            }
        }
        self.next_slot = Some(slot + 1);
        if lengths.iter().all(|&q| q == 0) {
            if self.in_cycle {
                self.current.cycles = 1;
                self.close_cycle();
            }
            self.in_cycle = true;
            self.renewals += 1;
            self.first_renewal.get_or_insert(slot);
            self.last_renewal = Some(slot);
        }
        let l = self.ladder.len();
        for (i, &q) in lengths.iter().enumerate() {
            for (j, &m) in self.ladder.iter().enumerate() {
                let r = q.min(m);
                self.overall.q[i * l + j] += r;
                if self.in_cycle {
                    self.current.q[i * l + j] += r;
                }
            }
        }
        self.overall.slots += 1;
        if self.in_cycle {
            self.current.slots += 1;
        }
        Ok(())
    }

    /// Records a file of `queue` completing with `delay` in the most recently
    /// observed slot.
    pub fn observe_completion(&mut self, queue: usize, delay: u64) {
        let l = self.ladder.len();
        self.overall.files[queue] += 1;
        if self.in_cycle {
            self.current.files[queue] += 1;
        }
        for (j, &m) in self.ladder.iter().enumerate() {
            let r = delay.min(m);
            self.overall.d[queue * l + j] += r;
            if self.in_cycle {
                self.current.d[queue * l + j] += r;
            }
        }
    }

    /// Convenience: records the pre-slot lengths of a step record.
    pub fn observe_step(&mut self, record: &StepRecord) -> Result<()> {
        self.observe_lengths(record.slot, &record.pre_lengths)
    }

    fn close_cycle(&mut self) {
        self.pending.add(&self.current);
        self.current.clear();
        if self.pending.cycles >= self.batch_size {
            self.batches.push(self.pending.clone());
            self.pending.clear();
            if self.batches.len() >= MAX_BATCHES {
                coalesce(&mut self.batches);
                self.batch_size *= 2;
            }
        }
    }

    /// Drops the incomplete trailing cycle and returns the mergeable summary.
    pub fn finish(mut self) -> RenewalSummary {
        if self.pending.cycles > 0 {
            self.batches.push(self.pending.clone());
        }
        RenewalSummary {
            ladder: self.ladder,
            num_queues: self.num_queues,
            batches: self.batches,
            overall: self.overall,
            renewals: self.renewals,
            first_renewal: self.first_renewal,
            last_renewal: self.last_renewal,
        }
    }
}

fn coalesce(batches: &mut Vec<Aggregate>) {
    let mut out = Vec::with_capacity(batches.len() / 2 + 1);
    let mut it = std::mem::take(batches).into_iter();
    while let Some(mut a) = it.next() {
        if let Some(b) = it.next() {
            a.add(&b);
        }
        out.push(a);
    }
    *batches = out;
}

/// Closed ledger of one or more replications.
#[derive(Debug, Clone, PartialEq)]
pub struct RenewalSummary {
    ladder: Vec<u64>,
    num_queues: usize,
    batches: Vec<Aggregate>,
    overall: Aggregate,
    renewals: u64,
    first_renewal: Option<u64>,
    last_renewal: Option<u64>,
}

impl RenewalSummary {
    /// Appends `other`'s cycles. Merging in a fixed order gives a fixed result.
    pub fn merge(&mut self, other: RenewalSummary) -> Result<()> {
        if other.ladder != self.ladder || other.num_queues != self.num_queues {
            return Err(Error::config(
                "cannot merge ledgers with different ladders or queue counts",
            ));
        }
        self.batches.extend(other.batches);
        while self.batches.len() >= MAX_BATCHES {
            coalesce(&mut self.batches);
        }
        self.overall.add(&other.overall);
        self.renewals += other.renewals;
        self.first_renewal = match (self.first_renewal, other.first_renewal) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        self.last_renewal = self.last_renewal.max(other.last_renewal);
        Ok(())
    }

    pub fn ladder(&self) -> &[u64] {
        &self.ladder
    }

    /// Number of complete cycles.
    pub fn cycles(&self) -> u64 {
        self.batches.iter().map(|b| b.cycles).sum()
    }

    pub fn renewals(&self) -> u64 {
        self.renewals
    }

    pub fn first_renewal(&self) -> Option<u64> {
        self.first_renewal
    }

    pub fn last_renewal(&self) -> Option<u64> {
        self.last_renewal
    }

    /// Total slots observed, inside or outside cycles.
    pub fn slots(&self) -> u64 {
        self.overall.slots
    }

    /// Mean cycle length, if any cycle completed.
    pub fn mean_cycle_length(&self) -> Option<f64> {
        let c = self.cycles();
        (c > 0).then(|| self.batches.iter().map(|b| b.slots).sum::<u64>() as f64 / c as f64)
    }

    /// Truncated means of the queue-length marginal of `queue`.
    pub fn queue_curve(&self, queue: usize, rng: &mut StreamRng) -> TruncatedMeanCurve {
        let l = self.ladder.len();
        let time_average = (0..l)
            .map(|j| ratio(self.overall.q[queue * l + j], self.overall.slots))
            .collect();
        self.curve(
            CurveQuantity::QueueLength,
            queue,
            time_average,
            |b| b.slots,
            |b, j| b.q[queue * l + j],
            rng,
        )
    }

    /// Truncated means of the file delays of `queue`.
    pub fn delay_curve(&self, queue: usize, rng: &mut StreamRng) -> TruncatedMeanCurve {
        let l = self.ladder.len();
        let time_average = (0..l)
            .map(|j| ratio(self.overall.d[queue * l + j], self.overall.files[queue]))
            .collect();
        self.curve(
            CurveQuantity::Delay,
            queue,
            time_average,
            |b| b.files[queue],
            |b, j| b.d[queue * l + j],
            rng,
        )
    }

    fn curve(
        &self,
        quantity: CurveQuantity,
        queue: usize,
        time_average: Vec<f64>,
        denom: impl Fn(&Aggregate) -> u64,
        numer: impl Fn(&Aggregate, usize) -> u64,
        rng: &mut StreamRng,
    ) -> TruncatedMeanCurve {
        let l = self.ladder.len();
        let cycles = self.cycles();
        let mut curve = TruncatedMeanCurve {
            quantity,
            queue,
            levels: self.ladder.clone(),
            estimates: Vec::new(),
            stderrs: Vec::new(),
            time_average,
            top_slope_se: None,
            cycles,
            status: CurveStatus::NoRenewals,
        };
        if cycles == 0 {
            return curve;
        }
        let total_x: u64 = self.batches.iter().map(&denom).sum();
        if total_x == 0 {
            curve.status = CurveStatus::NoSamples;
            return curve;
        }
        curve.estimates = (0..l)
            .map(|j| ratio(self.batches.iter().map(|b| numer(b, j)).sum(), total_x))
            .collect();

        let nb = self.batches.len();
        let mut reps: Vec<Vec<f64>> = vec![Vec::with_capacity(BOOTSTRAP_RESAMPLES); l];
        let mut slopes = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
        let mut counts = Vec::new();
        let mut row = vec![0.0; l];
        for _ in 0..BOOTSTRAP_RESAMPLES {
            resample_counts(nb, rng, &mut counts);
            let x: u64 = self
                .batches
                .iter()
                .zip(&counts)
                .map(|(b, &c)| denom(b) * u64::from(c))
                .sum();
            if x == 0 {
                continue;
            }
            for (j, rep) in reps.iter_mut().enumerate() {
                let r: u64 = self
                    .batches
                    .iter()
                    .zip(&counts)
                    .map(|(b, &c)| numer(b, j) * u64::from(c))
                    .sum();
                row[j] = r as f64 / x as f64;
                rep.push(row[j]);
            }
            if let Some(s) = top_half_slope(&self.ladder, &row) {
                slopes.push(s);
            }
        }
        if nb < 2 {
            curve.stderrs = vec![f64::NAN; l];
        } else {
            curve.stderrs = reps.iter().map(|r| sample_std(r)).collect();
            if slopes.len() == reps[0].len() && slopes.len() >= 2 {
                curve.top_slope_se = Some(sample_std(&slopes));
            }
        }
        curve.status = if cycles < MIN_CYCLES {
            CurveStatus::TooFewCycles
        } else {
            CurveStatus::Ok
        };
        curve
    }
}

/// Least-squares slope of `ln estimate` on `ln M` over indices `⌊L/2⌋..L`.
pub fn top_half_slope(levels: &[u64], estimates: &[f64]) -> Option<f64> {
    let l = levels.len();
    let top = l / 2..l;
    if top.len() < 2 || estimates[top.clone()].iter().any(|&e| !(e > 0.0)) {
        return None;
    }
    let x: Vec<f64> = levels[top.clone()]
        .iter()
        .map(|&m| (m as f64).ln())
        .collect();
    let y: Vec<f64> = estimates[top].iter().map(|e| e.ln()).collect();
    super::stats::fit_line(&x, &y).map(|f| f.slope)
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        f64::NAN
    } else {
        num as f64 / den as f64
    }
}

/// Truncated-mean curve of `queue` over a stream of step records, with
/// bootstrap draws taken from the `Bootstrap` stream of `seed`.
pub fn truncated_mean<I>(
    records: I,
    queue: usize,
    ladder: &[u64],
    seed: u64,
) -> Result<TruncatedMeanCurve>
where
    I: IntoIterator,
    I::Item: std::borrow::Borrow<StepRecord>,
{
    use std::borrow::Borrow;
    let mut it = records.into_iter().peekable();
    let n = match it.peek() {
        Some(r) => r.borrow().num_queues(),
        None => return Err(Error::Precondition("empty trace".into())),
    };
    if queue >= n {
        return Err(Error::Dimension {
            expected: n,
            got: queue + 1,
        });
    }
    let mut ledger = RenewalLedger::new(n, ladder)?;
    for r in it {
        ledger.observe_step(r.borrow())?;
    }
    let mut rng = StreamRng::for_role(seed, 0, StreamRole::Bootstrap);
    Ok(ledger.finish().queue_curve(queue, &mut rng))
}
