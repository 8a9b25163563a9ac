//! Conditional `T`-step drift of the piecewise-linear Lyapunov function
//! `V = 3·Q₂ + [Q₃ − Q₁ − Q₂]⁺` above the level `α = 6T`.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::stats::{quantile_sorted, resample_counts};
use crate::error::{Error, Result};
use crate::network::StepRecord;
use crate::rng::{StreamRng, StreamRole};

/// Bootstrap resamples for the drift interval.
pub const DRIFT_RESAMPLES: usize = 1000;

/// `V(Q) = 3·Q₂ + [Q₃ − Q₁ − Q₂]⁺` for a three-queue state.
pub fn lyapunov_v(lengths: &[u64]) -> Result<u64> {
    if lengths.len() != 3 {
        return Err(Error::Dimension {
            expected: 3,
            got: lengths.len(),
        });
    }
    Ok(v3(lengths))
}

#[inline]
fn v3(q: &[u64]) -> u64 {
    3 * q[1] + q[2].saturating_sub(q[0] + q[1])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftVerdict {
    Negative,
    NonNegative,
    Inconclusive,
}

/// Sum, sum of squares and count of drift samples.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DriftMoments {
    pub count: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl DriftMoments {
    fn push(&mut self, d: f64) {
        self.count += 1;
        self.sum += d;
        self.sum_sq += d * d;
    }

    fn add(&mut self, o: &DriftMoments) {
        self.count += o.count;
        self.sum += o.sum;
        self.sum_sq += o.sum_sq;
    }

    pub fn mean(&self) -> Option<f64> {
        (self.count > 0).then(|| self.sum / self.count as f64)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
struct Block {
    all: DriftMoments,
    case1: DriftMoments,
    case2: DriftMoments,
}

/// Per-case summary inside a [`DriftProbeReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseDrift {
    pub samples: u64,
    pub mean: Option<f64>,
    pub ci: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftProbeReport {
    pub t: u64,
    pub alpha: u64,
    /// Mean of `V(t+T) − V(t)` over slots with `V(t) > α`.
    pub drift: Option<f64>,
    pub samples: u64,
    /// Block-bootstrap 95% percentile interval.
    pub ci: Option<(f64, f64)>,
    pub block_length: u64,
    pub blocks: u64,
    /// Samples with `Q₂(t) > T`.
    pub case1: CaseDrift,
    /// Samples with `Q₃(t) > Q₁(t) + Q₂(t) + 3T`.
    pub case2: CaseDrift,
    pub verdict: DriftVerdict,
}

/// Streaming drift accumulator over one or more traces.
///
/// Every slot `t` with `V(t) > α` whose successor `t + T` is observed
/// contributes one sample. Samples are grouped into blocks of `10·T`
/// consecutive start slots for the block bootstrap.
#[derive(Debug, Clone)]
pub struct DriftAccumulator {
    t: u64,
    window: VecDeque<(u64, u8)>,
    next_slot: Option<u64>,
    blocks: Vec<Block>,
    empty_blocks: u64,
    current: Block,
    current_index: Option<u64>,
}

impl DriftAccumulator {
    pub fn new(t: u64) -> Result<Self> {
        if t == 0 {
            return Err(Error::config("drift look-ahead T must be at least 1"));
        }
        Ok(Self {
            t,
            window: VecDeque::with_capacity(t as usize + 1),
            next_slot: None,
            blocks: Vec::new(),
            empty_blocks: 0,
            current: Block::default(),
            current_index: None,
        })
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn alpha(&self) -> u64 {
        6 * self.t
    }

    pub fn block_length(&self) -> u64 {
        10 * self.t
    }

    /// Records `Q(slot)`; slots must be consecutive within a trace.
    pub fn observe_lengths(&mut self, slot: u64, lengths: &[u64]) -> Result<()> {
        if lengths.len() != 3 {
            return Err(Error::Dimension {
                expected: 3,
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
        let v = v3(lengths);
        let t = self.t;
        let case = u8::from(lengths[1] > t)
            | (u8::from(lengths[2] > lengths[0] + lengths[1] + 3 * t) << 1);
        if self.window.len() as u64 == t {
            let (v0, case0) = self.window.pop_front().expect("window full");
            let start = slot - t;
            if v0 > self.alpha() {
                self.record(start, v as f64 - v0 as f64, case0);
            }
        }
        self.window.push_back((v, case));
        Ok(())
    }

    pub fn observe_step(&mut self, record: &StepRecord) -> Result<()> {
        self.observe_lengths(record.slot, &record.pre_lengths)
    }

    fn record(&mut self, start: u64, d: f64, case: u8) {
        let idx = start / self.block_length();
        match self.current_index {
            Some(c) if c == idx => {}
            Some(c) => {
                self.flush();
                self.empty_blocks += idx - c - 1;
                self.current_index = Some(idx);
            }
            None => {
                self.empty_blocks += idx;
                self.current_index = Some(idx);
            }
        }
        self.current.all.push(d);
        if case & 1 != 0 {
            self.current.case1.push(d);
        }
        if case & 2 != 0 {
            self.current.case2.push(d);
        }
    }

    fn flush(&mut self) {
        if self.current.all.count > 0 {
            self.blocks.push(std::mem::take(&mut self.current));
        }
    }

    /// Ends the current trace. `horizon` is its number of slots; blocks of
    /// start slots that produced no sample are counted so they take part in
    /// the bootstrap. The next trace may start again at slot 0.
    pub fn end_trace(&mut self, horizon: u64) {
        let usable = horizon.saturating_sub(self.t);
        let total_blocks = usable.div_ceil(self.block_length());
        let used = self.current_index.map_or(0, |c| c + 1);
        self.flush();
        self.empty_blocks += total_blocks.saturating_sub(used);
        self.current_index = None;
        self.window.clear();
        self.next_slot = None;
    }

    /// Appends another accumulator's closed traces.
    pub fn merge(&mut self, mut other: DriftAccumulator) -> Result<()> {
        if other.t != self.t {
            return Err(Error::config("cannot merge drift probes with different T"));
        }
        other.flush();
        self.flush();
        self.blocks.extend(other.blocks);
        self.empty_blocks += other.empty_blocks;
        Ok(())
    }

    pub fn report(&self, seed: u64) -> DriftProbeReport {
        let mut blocks = self.blocks.clone();
        if self.current.all.count > 0 {
            blocks.push(self.current.clone());
        }
        let total_blocks = blocks.len() as u64 + self.empty_blocks;
        let mut rng = StreamRng::for_role(seed, 0, StreamRole::Bootstrap);
        let all = case_summary(&blocks, total_blocks, |b| &b.all, &mut rng);
        let case1 = case_summary(&blocks, total_blocks, |b| &b.case1, &mut rng);
        let case2 = case_summary(&blocks, total_blocks, |b| &b.case2, &mut rng);
        let verdict = match all.ci {
            None => DriftVerdict::Inconclusive,
            Some((_, hi)) if hi < 0.0 => DriftVerdict::Negative,
            Some((lo, _)) if lo >= 0.0 => DriftVerdict::NonNegative,
            Some(_) => DriftVerdict::Inconclusive,
        };
        DriftProbeReport {
            t: self.t,
            alpha: self.alpha(),
            drift: all.mean,
            samples: all.samples,
            ci: all.ci,
            block_length: self.block_length(),
            blocks: total_blocks,
            case1,
            case2,
            verdict,
        }
    }
}

fn case_summary(
    blocks: &[Block],
    total_blocks: u64,
    pick: impl Fn(&Block) -> &DriftMoments,
    rng: &mut StreamRng,
) -> CaseDrift {
    let mut m = DriftMoments::default();
    for b in blocks {
        m.add(pick(b));
    }
    let mean = m.mean();
    if mean.is_none() || total_blocks < 2 {
        return CaseDrift {
            samples: m.count,
            mean,
            ci: None,
        };
    }
    // Indices past the nonempty blocks stand for empty ones.
    let n = total_blocks as usize;
    let mut counts = Vec::new();
    let mut means = Vec::with_capacity(DRIFT_RESAMPLES);
    for _ in 0..DRIFT_RESAMPLES {
        resample_counts(n, rng, &mut counts);
        let mut r = DriftMoments::default();
        for (b, &c) in blocks.iter().zip(&counts) {
            let s = pick(b);
            r.count += s.count * u64::from(c);
            r.sum += s.sum * f64::from(c);
        }
        if let Some(v) = r.mean() {
            means.push(v);
        }
    }
    means.sort_by(f64::total_cmp);
    let ci = (!means.is_empty()).then(|| {
        (
            quantile_sorted(&means, 0.025),
            quantile_sorted(&means, 0.975),
        )
    });
    CaseDrift {
        samples: m.count,
        mean,
        ci,
    }
}

/// Drift probe over one trace of three-queue step records.
pub fn drift_probe<I>(records: I, t: u64, seed: u64) -> Result<DriftProbeReport>
where
    I: IntoIterator,
    I::Item: std::borrow::Borrow<StepRecord>,
{
    use std::borrow::Borrow;
    let mut acc = DriftAccumulator::new(t)?;
    let mut n = 0u64;
    for r in records {
        acc.observe_step(r.borrow())?;
        n += 1;
    }
    acc.end_trace(n);
    Ok(acc.report(seed))
}
