use maxweight_lab::arrivals::{
    analytic_moments, calibrate_rate, ArrivalSampler, ArrivalSpec, LawFamily,
};
use maxweight_lab::estimators::{hill_top_fraction, ValueHistogram};
use maxweight_lab::rng::{StreamRng, StreamRole};
use proptest::prelude::*;

fn draws(spec: &ArrivalSpec, seed: u64, role: StreamRole, n: usize) -> Vec<u64> {
    let mut s = ArrivalSampler::new(spec);
    let mut rng = StreamRng::for_role(seed, 0, role);
    (0..n).map(|_| s.sample(&mut rng)).collect()
}

fn correlation(x: &[u64], y: &[u64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<u64>() as f64 / n;
    let my = y.iter().sum::<u64>() as f64 / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (da, db) = (a as f64 - mx, b as f64 - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    sxy / (sxx * syy).sqrt()
}

#[test]
fn arrival_substreams_are_uncorrelated() {
    let specs = [
        ArrivalSpec::bernoulli(0.2).unwrap(),
        ArrivalSpec::bernoulli(0.6).unwrap(),
        ArrivalSpec::poisson(0.3).unwrap(),
    ];
    let streams: Vec<Vec<u64>> = (0..3)
        .map(|i| draws(&specs[i], 17, StreamRole::Arrivals(i as u32), 1_000_000))
        .collect();
    for i in 0..3 {
        for j in i + 1..3 {
            let rho = correlation(&streams[i], &streams[j]);
            assert!(rho.abs() < 0.01, "queues {i},{j}: ρ = {rho}");
        }
    }
}

#[test]
fn zeta_tail_index_from_hill() {
    let spec = calibrate_rate(0.2, LawFamily::BernoulliZeta { s: 2.5 }).unwrap();
    let hist = ValueHistogram::from_values(draws(&spec, 4, StreamRole::Arrivals(0), 10_000_000));
    let alpha = hill_top_fraction(&hist, 0.01).unwrap();
    assert!((alpha - 1.5).abs() <= 0.15, "Hill index {alpha}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn declared_mean_is_analytic(family in prop_oneof![
        Just(LawFamily::Bernoulli),
        Just(LawFamily::Geometric),
        Just(LawFamily::Poisson),
        (2.1f64..2.9).prop_map(|s| LawFamily::BernoulliZeta { s }),
    ], mean in 0.01f64..0.9) {
        let spec = calibrate_rate(mean, family).unwrap();
        prop_assert!((spec.declared_mean() - mean).abs() <= 1e-12);
        let m = analytic_moments(&spec).unwrap();
        prop_assert!((m.mean - spec.declared_mean()).abs() <= 1e-12);
    }
}
