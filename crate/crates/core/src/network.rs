//! Slotted single-hop switched network: feasible schedules, queue-length
//! dynamics and the Max-Weight decision.
//!
//! Within slot `t` the chosen schedule is resolved against `Q(t)` first and
//! the slot's arrivals land afterwards, so
//! `Q_i(t+1) = Q_i(t) + A_i(t) - S_i(t)·1{Q_i(t) > 0}` holds exactly and a
//! packet arriving in slot `t` is first eligible for service in slot `t+1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::StreamRng;

/// A 0/1 service vector, one entry per queue.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<u8>", into = "Vec<u8>")]
pub struct Schedule {
    service: Vec<u8>,
}

impl Schedule {
    pub fn new(service: Vec<u8>) -> Result<Self> {
        if let Some(bad) = service.iter().find(|&&s| s > 1) {
            return Err(Error::config(format!("schedule entry {bad} is not 0 or 1")));
        }
        Ok(Self { service })
    }

    pub fn service(&self) -> &[u8] {
        &self.service
    }

    pub fn num_queues(&self) -> usize {
        self.service.len()
    }

    pub fn serves(&self, queue: usize) -> bool {
        self.service[queue] == 1
    }

    pub fn is_empty_schedule(&self) -> bool {
        self.service.iter().all(|&s| s == 0)
    }

    /// `Σ_i Q_i·S_i`.
    pub fn weight(&self, lengths: &[u64]) -> u64 {
        self.service
            .iter()
            .zip(lengths)
            .filter(|(&s, _)| s == 1)
            .map(|(_, &q)| q)
            .sum()
    }
}

impl TryFrom<Vec<u8>> for Schedule {
    type Error = Error;

    fn try_from(v: Vec<u8>) -> Result<Self> {
        Schedule::new(v)
    }
}

impl From<Schedule> for Vec<u8> {
    fn from(s: Schedule) -> Self {
        s.service
    }
}

/// The feasible schedules. Always contains the all-zero schedule and no
/// duplicates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Schedule>", into = "Vec<Schedule>")]
pub struct ScheduleSet {
    schedules: Vec<Schedule>,
    num_queues: usize,
}

impl ScheduleSet {
    pub fn new(schedules: Vec<Schedule>) -> Result<Self> {
        let num_queues = schedules
            .first()
            .map(Schedule::num_queues)
            .ok_or_else(|| Error::config("schedule set is empty"))?;
        if num_queues == 0 {
            return Err(Error::config("schedules must cover at least one queue"));
        }
        for s in &schedules {
            if s.num_queues() != num_queues {
                return Err(Error::Dimension {
                    expected: num_queues,
                    got: s.num_queues(),
                });
            }
        }
        if !schedules.iter().any(Schedule::is_empty_schedule) {
            return Err(Error::config(
                "schedule set must contain the all-zero schedule",
            ));
        }
        for (i, a) in schedules.iter().enumerate() {
            if schedules[..i].contains(a) {
                return Err(Error::config(format!(
                    "duplicate schedule {:?}",
                    a.service()
                )));
            }
        }
        Ok(Self {
            schedules,
            num_queues,
        })
    }

    /// `{(0,0,0), (1,1,0), (0,0,1)}`: queues 1 and 2 together, or queue 3 alone.
    pub fn three_queue() -> Self {
        let s = |v: [u8; 3]| Schedule {
            service: v.to_vec(),
        };
        Self {
            schedules: vec![s([0, 0, 0]), s([1, 1, 0]), s([0, 0, 1])],
            num_queues: 3,
        }
    }

    pub fn schedules(&self) -> &[Schedule] {
        &self.schedules
    }

    pub fn get(&self, index: usize) -> &Schedule {
        &self.schedules[index]
    }

    pub fn len(&self) -> usize {
        self.schedules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.schedules.is_empty()
    }

    pub fn num_queues(&self) -> usize {
        self.num_queues
    }

    pub fn is_three_queue_default(&self) -> bool {
        *self == Self::three_queue()
    }
}

impl Default for ScheduleSet {
    fn default() -> Self {
        Self::three_queue()
    }
}

impl TryFrom<Vec<Schedule>> for ScheduleSet {
    type Error = Error;

    fn try_from(v: Vec<Schedule>) -> Result<Self> {
        ScheduleSet::new(v)
    }
}

impl From<ScheduleSet> for Vec<Schedule> {
    fn from(s: ScheduleSet) -> Self {
        s.schedules
    }
}

/// Queue lengths at the beginning of `slot`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QueueState {
    pub lengths: Vec<u64>,
    pub slot: u64,
}

impl QueueState {
    pub fn empty(num_queues: usize) -> Self {
        Self {
            lengths: vec![0; num_queues],
            slot: 0,
        }
    }

    pub fn new(lengths: Vec<u64>) -> Self {
        Self { lengths, slot: 0 }
    }

    pub fn is_empty_system(&self) -> bool {
        self.lengths.iter().all(|&q| q == 0)
    }

    pub fn num_queues(&self) -> usize {
        self.lengths.len()
    }
}

/// Everything that happened in one slot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    pub slot: u64,
    pub arrivals: Vec<u64>,
    pub schedule_index: usize,
    /// Actual removals `S_i(t)·1{Q_i(t) > 0}`.
    pub served: Vec<u8>,
    pub pre_lengths: Vec<u64>,
    pub post_lengths: Vec<u64>,
}

impl StepRecord {
    pub fn zeroed(num_queues: usize) -> Self {
        Self {
            slot: 0,
            arrivals: vec![0; num_queues],
            schedule_index: 0,
            served: vec![0; num_queues],
            pre_lengths: vec![0; num_queues],
            post_lengths: vec![0; num_queues],
        }
    }

    pub fn num_queues(&self) -> usize {
        self.arrivals.len()
    }
}

fn check_dims(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Dimension { expected, got });
    }
    Ok(())
}

/// Index of a schedule maximizing `Σ_i Q_i·S_i`.
///
/// With `k > 1` maximizers one uniform draw on `0..k` picks among them in
/// set order; with a unique maximizer the rng is not touched.
pub fn max_weight_select(
    state: &QueueState,
    set: &ScheduleSet,
    rng: &mut StreamRng,
) -> Result<usize> {
    check_dims(set.num_queues(), state.num_queues())?;
    Ok(select_unchecked(&state.lengths, set, rng))
}

#[inline]
pub(crate) fn select_unchecked(lengths: &[u64], set: &ScheduleSet, rng: &mut StreamRng) -> usize {
    let mut best = 0u64;
    let mut count = 0u64;
    let mut first = 0usize;
    for (i, s) in set.schedules.iter().enumerate() {
        let w = s.weight(lengths);
        if count == 0 || w > best {
            best = w;
            count = 1;
            first = i;
        } else if w == best {
            count += 1;
        }
    }
    if count == 1 {
        return first;
    }
    let mut pick = rng.below(count);
    for (i, s) in set.schedules.iter().enumerate().skip(first) {
        if s.weight(lengths) == best {
            if pick == 0 {
                return i;
            }
            pick -= 1;
        }
    }
    unreachable!("maximizer count mismatch")
}

/// Advances `state` by one slot under `schedule` and `arrivals`.
pub fn step(
    state: &QueueState,
    arrivals: &[u64],
    schedule: &Schedule,
) -> Result<(QueueState, StepRecord)> {
    let n = state.num_queues();
    check_dims(n, arrivals.len())?;
    check_dims(n, schedule.num_queues())?;
    let mut rec = StepRecord::zeroed(n);
    rec.slot = state.slot;
    rec.arrivals.copy_from_slice(arrivals);
    rec.pre_lengths.copy_from_slice(&state.lengths);
    apply_step(&mut rec, schedule);
    let next = QueueState {
        lengths: rec.post_lengths.clone(),
        slot: state.slot + 1,
    };
    Ok((next, rec))
}

/// Fills `served` and `post_lengths` of `rec` from its `pre_lengths`,
/// `arrivals` and the schedule.
#[inline]
pub(crate) fn apply_step(rec: &mut StepRecord, schedule: &Schedule) {
    for i in 0..rec.pre_lengths.len() {
        let q = rec.pre_lengths[i];
        let served = u8::from(schedule.service[i] == 1 && q > 0);
        rec.served[i] = served;
        rec.post_lengths[i] = q - u64::from(served) + rec.arrivals[i];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamRole;

    fn rng() -> StreamRng {
        StreamRng::for_role(5, 0, StreamRole::Scheduler)
    }

    fn state(q: [u64; 3]) -> QueueState {
        QueueState::new(q.to_vec())
    }

    #[test]
    fn default_set_shape() {
        let set = ScheduleSet::three_queue();
        assert_eq!(set.len(), 3);
        assert_eq!(set.get(1).service(), &[1, 1, 0]);
        assert!(set.get(0).is_empty_schedule());
    }

    #[test]
    fn set_validation() {
        let s = |v: &[u8]| Schedule::new(v.to_vec()).unwrap();
        assert!(
            ScheduleSet::new(vec![s(&[1, 0])]).is_err(),
            "missing empty schedule"
        );
        assert!(ScheduleSet::new(vec![s(&[0, 0]), s(&[1, 0]), s(&[1, 0])]).is_err());
        assert!(ScheduleSet::new(vec![s(&[0, 0]), s(&[1, 0, 0])]).is_err());
        assert!(ScheduleSet::new(vec![]).is_err());
        assert!(Schedule::new(vec![0, 2]).is_err());
        assert!(ScheduleSet::new(vec![s(&[0, 0]), s(&[1, 1])]).is_ok());
    }

    #[test]
    fn forced_argmax() {
        let set = ScheduleSet::three_queue();
        let mut r = rng();
        assert_eq!(
            max_weight_select(&state([3, 2, 4]), &set, &mut r).unwrap(),
            1
        );
        assert_eq!(
            max_weight_select(&state([0, 5, 0]), &set, &mut r).unwrap(),
            1
        );
        assert_eq!(
            max_weight_select(&state([1, 1, 9]), &set, &mut r).unwrap(),
            2
        );
    }

    #[test]
    fn ties_cover_maximizers_only() {
        let set = ScheduleSet::three_queue();
        let mut r = rng();
        let mut seen = [0u32; 3];
        for _ in 0..3000 {
            seen[max_weight_select(&state([1, 0, 1]), &set, &mut r).unwrap()] += 1;
        }
        assert_eq!(seen[0], 0);
        assert!(seen[1] > 1300 && seen[2] > 1300, "{seen:?}");

        let mut seen = [0u32; 3];
        for _ in 0..3000 {
            seen[max_weight_select(&state([0, 0, 0]), &set, &mut r).unwrap()] += 1;
        }
        assert!(seen.iter().all(|&c| c > 850), "{seen:?}");
    }

    #[test]
    fn unique_maximizer_leaves_rng_untouched() {
        let set = ScheduleSet::three_queue();
        let mut a = rng();
        let b = a.clone();
        max_weight_select(&state([3, 2, 4]), &set, &mut a).unwrap();
        let (mut a, mut b) = (a, b);
        assert_eq!(a.below(1 << 40), b.below(1 << 40));
    }

    #[test]
    fn dimension_mismatch() {
        let set = ScheduleSet::three_queue();
        let err = max_weight_select(&QueueState::new(vec![1, 2]), &set, &mut rng()).unwrap_err();
        assert!(matches!(
            err,
            Error::Dimension {
                expected: 3,
                got: 2
            }
        ));
        let sched = set.get(1).clone();
        assert!(step(&state([1, 1, 1]), &[1, 1], &sched).is_err());
    }

    #[test]
    fn step_examples() {
        let set = ScheduleSet::three_queue();
        let (next, rec) = step(&state([5, 0, 2]), &[1, 3, 0], set.get(1)).unwrap();
        assert_eq!(next.lengths, vec![5, 3, 2]);
        assert_eq!(rec.served, vec![1, 0, 0]);
        assert_eq!(next.slot, 1);

        for idx in 0..3 {
            let (next, rec) = step(&state([0, 0, 0]), &[0, 0, 0], set.get(idx)).unwrap();
            assert_eq!(next.lengths, vec![0, 0, 0]);
            assert_eq!(rec.served, vec![0, 0, 0]);
        }

        let (next, rec) = step(&state([1, 1, 9]), &[0, 0, 2], set.get(2)).unwrap();
        assert_eq!(next.lengths, vec![1, 1, 10]);
        assert_eq!(rec.served, vec![0, 0, 1]);
    }
}
