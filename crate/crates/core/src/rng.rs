//! Seeded random streams.
//!
//! Every random quantity in the toolkit is drawn from a [`StreamRng`], a
//! ChaCha8 generator keyed by the master seed and positioned on one of its
//! 2^64 independent streams. The stream number packs a replication index
//! (high 32 bits) and a role (low 32 bits), so the scheduler's tie-breaker,
//! each queue's arrival process and the bootstrap resampler never share
//! random bits, and adding a queue or a probe does not shift anyone else's
//! draws.
//!
//! ChaCha8 output for a given key and stream is fixed by `rand_chacha`'s
//! value-stability guarantee; the master seed is expanded to the 256-bit key
//! with `SeedableRng::seed_from_u64`, which is likewise value-stable.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Role of a substream within one replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamRole {
    /// Max-Weight tie-breaking draws.
    Scheduler,
    /// Arrival process feeding queue `i` (zero-based).
    Arrivals(u32),
    /// Service-time draws in the workload bench.
    Service,
    /// Bernoulli customer arrivals in the workload bench.
    Customers,
    /// Bootstrap resampling of estimator outputs.
    Bootstrap,
}

impl StreamRole {
    fn code(self) -> u32 {
        match self {
            StreamRole::Scheduler => 0,
            StreamRole::Service => 1,
            StreamRole::Customers => 2,
            StreamRole::Bootstrap => 3,
            StreamRole::Arrivals(i) => 0x100 + i,
        }
    }
}

/// Identity of one substream: `(replication, role)` under a master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamId {
    pub replication: u32,
    pub role: StreamRole,
}

impl StreamId {
    pub fn new(replication: u32, role: StreamRole) -> Self {
        Self { replication, role }
    }

    /// The 64-bit ChaCha stream number.
    pub fn stream_number(self) -> u64 {
        (u64::from(self.replication) << 32) | u64::from(self.role.code())
    }
}

/// A deterministic random stream derived from `(master seed, stream id)`.
#[derive(Debug, Clone)]
pub struct StreamRng {
    inner: ChaCha8Rng,
}

impl StreamRng {
    pub fn new(master_seed: u64, id: StreamId) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(master_seed);
        inner.set_stream(id.stream_number());
        inner.set_word_pos(0);
        Self { inner }
    }

    /// Shorthand for `StreamRng::new(seed, StreamId::new(replication, role))`.
    pub fn for_role(master_seed: u64, replication: u32, role: StreamRole) -> Self {
        Self::new(master_seed, StreamId::new(replication, role))
    }

    /// Uniform on `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn unit(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `(0, 1]` with 53 bits of precision; never returns zero.
    #[inline]
    pub fn unit_open_zero(&mut self) -> f64 {
        ((self.inner.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer on `0..n` (Lemire's nearly-divisionless method).
    #[inline]
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        let mut m = u128::from(self.inner.next_u64()) * u128::from(n);
        let mut low = m as u64;
        if low < n {
            let threshold = n.wrapping_neg() % n;
            while low < threshold {
                m = u128::from(self.inner.next_u64()) * u128::from(n);
                low = m as u64;
            }
        }
        (m >> 64) as u64
    }
}

impl RngCore for StreamRng {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
