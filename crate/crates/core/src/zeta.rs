//! Riemann zeta evaluation and an inverse-survival sampler for the zeta law
//! `P(K = k) = k^{-s} / ζ(s)`, `k ≥ 1`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::rng::StreamRng;

/// Terms summed directly before switching to the Euler–Maclaurin tail.
const DIRECT_TERMS: u64 = 1000;

/// Largest value held in the sampling table; larger draws come from the
/// continuous Pareto tail.
pub const TABLE_MAX: usize = 1_000_000;
/// Prefix searched first; almost every draw ends there.
const HEAD: usize = 256;

/// `Σ_{k ≥ n} k^{-s}` by Euler–Maclaurin, accurate to ~1e-20 for n ≥ 1000.
fn tail_from(n: f64, s: f64) -> f64 {
    let f = n.powf(-s);
    n.powf(1.0 - s) / (s - 1.0) + 0.5 * f + s * f / (12.0 * n)
        - s * (s + 1.0) * (s + 2.0) * f / (720.0 * n * n * n)
}

/// Riemann zeta for real `s > 1`.
///
/// Returns `None` for `s <= 1` or non-finite input, where the series
/// diverges.
pub fn zeta(s: f64) -> Option<f64> {
    if !s.is_finite() || s <= 1.0 {
        return None;
    }
    // Sum small terms first.
    let mut acc = tail_from(DIRECT_TERMS as f64, s);
    for k in (1..DIRECT_TERMS).rev() {
        acc += (k as f64).powf(-s);
    }
    Some(acc)
}

/// Survival table for the zeta law with exponent `s`.
///
/// `survival[k] = P(K > k)` for `k = 0..=TABLE_MAX`; built from the tail
/// backwards so the small probabilities keep full relative precision.
#[derive(Debug)]
pub struct ZetaTable {
    s: f64,
    zeta_s: f64,
    survival: Vec<f64>,
}

impl ZetaTable {
    fn build(s: f64) -> Option<Self> {
        let zeta_s = zeta(s)?;
        let mut survival = vec![0.0; TABLE_MAX + 1];
        let mut tail = tail_from((TABLE_MAX + 1) as f64, s);
        survival[TABLE_MAX] = tail / zeta_s;
        for k in (1..=TABLE_MAX).rev() {
            tail += (k as f64).powf(-s);
            survival[k - 1] = tail / zeta_s;
        }
        // survival[0] is 1 up to rounding; pin it.
        survival[0] = 1.0;
        Some(Self {
            s,
            zeta_s,
            survival,
        })
    }

    /// Shared table for exponent `s`, built on first use.
    pub fn shared(s: f64) -> Option<Arc<ZetaTable>> {
        static CACHE: OnceLock<Mutex<HashMap<u64, Arc<ZetaTable>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(t) = guard.get(&s.to_bits()) {
            return Some(Arc::clone(t));
        }
        let table = Arc::new(Self::build(s)?);
        guard.insert(s.to_bits(), Arc::clone(&table));
        Some(table)
    }

    pub fn exponent(&self) -> f64 {
        self.s
    }

    pub fn normalizer(&self) -> f64 {
        self.zeta_s
    }

    /// `P(K > k)`.
    pub fn survival(&self, k: u64) -> f64 {
        if (k as usize) <= TABLE_MAX {
            self.survival[k as usize]
        } else {
            tail_from(k as f64 + 1.0, self.s) / self.zeta_s
        }
    }

    /// Maps `v ∈ (0, 1]` to the smallest `k ≥ 1` with `P(K > k) < v`.
    pub fn quantile(&self, v: f64) -> u64 {
        let table_tail = self.survival[TABLE_MAX];
        if v <= table_tail {
            // Pareto tail matched at the half-integer: P(K ≥ k) ∝ (k - 1/2)^{1-s}.
            let anchor = TABLE_MAX as f64 + 0.5;
            let y = anchor * (v / table_tail).powf(-1.0 / (self.s - 1.0));
            let k = (y + 0.5).floor();
            return if k >= u64::MAX as f64 {
                u64::MAX
            } else {
                (k as u64).max(TABLE_MAX as u64 + 1)
            };
        }
        // survival is strictly decreasing; find first index with survival < v.
        let head = &self.survival[..=HEAD];
        let idx = if v > head[HEAD] {
            head.partition_point(|&p| p >= v)
        } else {
            self.survival.partition_point(|&p| p >= v)
        };
        idx.max(1) as u64
    }

    pub fn sample(&self, rng: &mut StreamRng) -> u64 {
        self.quantile(rng.unit_open_zero())
    }
}
