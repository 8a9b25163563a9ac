mod common;

use common::{brute_step, chi_square_uniform, maximizers, regime};
use maxweight_lab::arrivals::ArrivalSpec;
use maxweight_lab::network::{max_weight_select, QueueState, ScheduleSet};
use maxweight_lab::rng::{StreamRng, StreamRole};
use maxweight_lab::sim::{run, trace_digest, Simulator};
use proptest::prelude::*;

fn arrival_spec() -> impl Strategy<Value = ArrivalSpec> {
    prop_oneof![
        (0.01f64..0.6).prop_map(|p| ArrivalSpec::bernoulli(p).unwrap()),
        (0.05f64..1.5).prop_map(|m| ArrivalSpec::geometric(m).unwrap()),
        (0.05f64..1.0).prop_map(|r| ArrivalSpec::poisson(r).unwrap()),
        (0.01f64..0.2, 2.1f64..2.9).prop_map(|(p, s)| ArrivalSpec::bernoulli_zeta(p, s).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn conservation_nonnegativity_and_work_conservation(
        specs in prop::collection::vec(arrival_spec(), 3),
        start in prop::collection::vec(0u64..20, 3),
        seed in any::<u64>(),
    ) {
        let mut sim = Simulator::new(ScheduleSet::three_queue(), &specs, start.clone(), seed, 0).unwrap();
        let mut arrived = [0u64; 3];
        let mut removed = [0u64; 3];
        for _ in 0..2_000 {
            let rec = sim.advance().clone();
            let weight: u64 = (0..3).map(|i| rec.pre_lengths[i] * common::SCHEDULES[rec.schedule_index][i]).sum();
            if rec.pre_lengths.iter().any(|&q| q > 0) {
                prop_assert!(weight > 0, "empty-weight schedule at {:?}", rec.pre_lengths);
            }
            for i in 0..3 {
                prop_assert!(u64::from(rec.served[i]) <= rec.pre_lengths[i]);
                prop_assert!(u64::from(rec.served[i]) <= common::SCHEDULES[rec.schedule_index][i]);
                prop_assert_eq!(rec.post_lengths[i] + u64::from(rec.served[i]), rec.pre_lengths[i] + rec.arrivals[i]);
                arrived[i] += rec.arrivals[i];
                removed[i] += u64::from(rec.served[i]);
                prop_assert_eq!(start[i] + arrived[i] - removed[i], rec.post_lengths[i]);
            }
        }
    }

    #[test]
    fn selection_is_a_maximizer(q in prop::collection::vec(0u64..1_000, 3), seed in any::<u64>()) {
        let set = ScheduleSet::three_queue();
        let mut rng = StreamRng::for_role(seed, 0, StreamRole::Scheduler);
        let idx = max_weight_select(&QueueState::new(q.clone()), &set, &mut rng).unwrap();
        prop_assert!(maximizers(&q).contains(&idx));
    }

    #[test]
    fn config_and_seed_fix_the_trace(seed in any::<u64>()) {
        let cfg = regime(0.4, 500, seed);
        let a = trace_digest(run(&cfg, 500, 0).unwrap(), 3).unwrap();
        let b = trace_digest(run(&cfg, 500, 0).unwrap(), 3).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn default_set_matches_hand_table() {
    let set = ScheduleSet::three_queue();
    for (s, want) in set.schedules().iter().zip(common::SCHEDULES) {
        let got: Vec<u64> = s.service().iter().map(|&v| u64::from(v)).collect();
        assert_eq!(got, want);
    }
}

#[test]
fn exhaustive_max_weight_over_small_states() {
    let set = ScheduleSet::three_queue();
    let mut rng = StreamRng::for_role(11, 0, StreamRole::Scheduler);
    for a in 0..=6 {
        for b in 0..=6 {
            for c in 0..=6 {
                let q = vec![a, b, c];
                let best = maximizers(&q);
                for _ in 0..4 {
                    let idx =
                        max_weight_select(&QueueState::new(q.clone()), &set, &mut rng).unwrap();
                    assert!(best.contains(&idx), "{q:?} picked {idx}");
                }
            }
        }
    }
}

#[test]
fn ties_are_uniform_over_maximizers() {
    let set = ScheduleSet::three_queue();
    let mut rng = StreamRng::for_role(5, 0, StreamRole::Scheduler);
    let mut pick = StreamRng::for_role(5, 1, StreamRole::Bootstrap);
    // Q₁ + Q₂ = Q₃ > 0: two maximizers.
    let mut two = [0u64; 3];
    for _ in 0..100_000 {
        let a = pick.below(50);
        let b = pick.below(50) + 1;
        let idx = max_weight_select(&QueueState::new(vec![a, b, a + b]), &set, &mut rng).unwrap();
        two[idx] += 1;
    }
    assert_eq!(two[0], 0);
    let (stat, crit) = chi_square_uniform(&two[1..]);
    assert!(stat < crit, "k=2 chi-square {stat} ≥ {crit}");
    // Empty system: every schedule has weight 0.
    let mut three = [0u64; 3];
    for _ in 0..100_000 {
        three[max_weight_select(&QueueState::empty(3), &set, &mut rng).unwrap()] += 1;
    }
    let (stat, crit) = chi_square_uniform(&three);
    assert!(stat < crit, "k=3 chi-square {stat} ≥ {crit}");
}

#[test]
fn brute_force_dynamics_agree() {
    let specs = [
        ArrivalSpec::bernoulli_zeta(0.1, 2.5).unwrap(),
        ArrivalSpec::geometric(0.5).unwrap(),
        ArrivalSpec::poisson(0.3).unwrap(),
    ];
    let mut sim = Simulator::new(ScheduleSet::three_queue(), &specs, vec![3, 0, 7], 99, 0).unwrap();
    let mut q = vec![3u64, 0, 7];
    for _ in 0..100_000 {
        let rec = sim.advance().clone();
        assert_eq!(rec.pre_lengths, q);
        let best = maximizers(&q);
        assert!(best.contains(&rec.schedule_index));
        q = brute_step(&q, &rec.arrivals, rec.schedule_index);
        assert_eq!(rec.post_lengths, q);
    }
}
