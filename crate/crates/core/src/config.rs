//! JSON experiment configuration.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::arrivals::ArrivalSpec;
use crate::error::{Error, Result};
use crate::network::ScheduleSet;

pub const SCHEMA_VERSION: u32 = 1;

/// Default truncation ladder `2^10 .. 2^14`.
pub fn default_ladder() -> Vec<u64> {
    (10..=14).map(|k| 1u64 << k).collect()
}

fn default_schedules() -> ScheduleSet {
    ScheduleSet::three_queue()
}

fn default_replications() -> u32 {
    1
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    /// Truncation levels `M` for `E[min{X, M}]`; strictly increasing.
    #[serde(default = "default_ladder")]
    pub truncation_ladder: Vec<u64>,
    /// Look-ahead `T` of the drift probe (threshold `6T`); `None` disables it.
    #[serde(default)]
    pub drift_t: Option<u64>,
    /// Start state for dedicated drift-probe replications. When absent the
    /// probe runs on the main replications.
    #[serde(default)]
    pub drift_initial_lengths: Option<Vec<u64>>,
    /// Burst size for the fluid comparison; `None` disables it.
    #[serde(default)]
    pub burst_b: Option<u64>,
    /// Tail-shape classification of queue-length marginals and delays.
    #[serde(default = "default_true")]
    pub tail: bool,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            truncation_ladder: default_ladder(),
            drift_t: None,
            drift_initial_lengths: None,
            burst_b: None,
            tail: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub dir: Option<String>,
    /// Per-replication trace CSV.
    #[serde(default)]
    pub trace_csv: bool,
    /// Per-replication file-delay CSV.
    #[serde(default = "default_true")]
    pub delay_csv: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: None,
            trace_csv: false,
            delay_csv: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub schema_version: u32,
    pub num_queues: usize,
    #[serde(default = "default_schedules")]
    pub schedules: ScheduleSet,
    pub arrivals: Vec<ArrivalSpec>,
    pub horizon: u64,
    #[serde(default = "default_replications")]
    pub replications: u32,
    pub seed: u64,
    #[serde(default)]
    pub initial_lengths: Option<Vec<u64>>,
    #[serde(default)]
    pub probes: ProbeConfig,
    #[serde(default)]
    pub outputs: OutputConfig,
}

impl SimConfig {
    /// Three-queue default schedule set with the given arrival laws.
    pub fn three_queue(arrivals: Vec<ArrivalSpec>, horizon: u64, seed: u64) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            num_queues: 3,
            schedules: ScheduleSet::three_queue(),
            arrivals,
            horizon,
            replications: 1,
            seed,
            initial_lengths: None,
            probes: ProbeConfig::default(),
            outputs: OutputConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let n = self.num_queues;
        if n == 0 {
            return Err(Error::config("num_queues must be positive"));
        }
        if self.schedules.num_queues() != n {
            return Err(Error::Dimension {
                expected: n,
                got: self.schedules.num_queues(),
            });
        }
        if self.arrivals.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: self.arrivals.len(),
            });
        }
        for init in [&self.initial_lengths, &self.probes.drift_initial_lengths]
            .into_iter()
            .flatten()
        {
            if init.len() != n {
                return Err(Error::Dimension {
                    expected: n,
                    got: init.len(),
                });
            }
        }
        if self.horizon == 0 {
            return Err(Error::config("horizon must be at least 1"));
        }
        if self.replications == 0 {
            return Err(Error::config("replications must be at least 1"));
        }
        let ladder = &self.probes.truncation_ladder;
        if ladder.is_empty() || ladder[0] == 0 || ladder.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config(
                "truncation_ladder must be positive and strictly increasing",
            ));
        }
        if self.probes.drift_t == Some(0) {
            return Err(Error::config("drift_t must be at least 1"));
        }
        if (self.probes.drift_t.is_some() || self.probes.burst_b.is_some()) && n != 3 {
            return Err(Error::config(
                "drift and burst probes need the three-queue system",
            ));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: SimConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn initial_state(&self) -> Vec<u64> {
        self.initial_lengths
            .clone()
            .unwrap_or_else(|| vec![0; self.num_queues])
    }

    /// Arrival rate vector `λ` (declared means).
    pub fn rates(&self) -> Vec<f64> {
        self.arrivals
            .iter()
            .map(ArrivalSpec::declared_mean)
            .collect()
    }

    /// SHA-256 of the compact JSON serialization, hex-encoded.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&canonical))
    }
}
