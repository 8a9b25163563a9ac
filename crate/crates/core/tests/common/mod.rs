#![allow(dead_code)]

use maxweight_lab::arrivals::{calibrate_rate, ArrivalSpec, LawFamily};
use maxweight_lab::config::SimConfig;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// The three-queue schedules written out by hand.
pub const SCHEDULES: [[u64; 3]; 3] = [[0, 0, 0], [1, 1, 0], [0, 0, 1]];

pub fn weight(q: &[u64], s: &[u64; 3]) -> u64 {
    q.iter().zip(s).map(|(a, b)| a * b).sum()
}

/// Indices of all weight maximizers.
pub fn maximizers(q: &[u64]) -> Vec<usize> {
    let best = SCHEDULES.iter().map(|s| weight(q, s)).max().unwrap();
    (0..3)
        .filter(|&i| weight(q, &SCHEDULES[i]) == best)
        .collect()
}

/// `Q(t+1) = Q(t) + A(t) − S(t)·1{Q(t) > 0}` computed directly.
pub fn brute_step(q: &[u64], a: &[u64], sched: usize) -> Vec<u64> {
    (0..3)
        .map(|i| {
            let s = SCHEDULES[sched][i];
            let removal = if q[i] > 0 { s } else { 0 };
            q[i] + a[i] - removal
        })
        .collect()
}

/// Pearson statistic against uniform and its 99% critical value.
pub fn chi_square_uniform(counts: &[u64]) -> (f64, f64) {
    let n: u64 = counts.iter().sum();
    let expected = n as f64 / counts.len() as f64;
    let stat = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    let crit = ChiSquared::new((counts.len() - 1) as f64)
        .unwrap()
        .inverse_cdf(0.99);
    (stat, crit)
}

/// λ = (0.2, λ₂, 0.3) with zeta(2.5) traffic at queue 1 and Bernoulli
/// elsewhere.
pub fn regime(lambda2: f64, horizon: u64, seed: u64) -> SimConfig {
    SimConfig::three_queue(
        vec![
            calibrate_rate(0.2, LawFamily::BernoulliZeta { s: 2.5 }).unwrap(),
            ArrivalSpec::bernoulli(lambda2).unwrap(),
            ArrivalSpec::bernoulli(0.3).unwrap(),
        ],
        horizon,
        seed,
    )
}
