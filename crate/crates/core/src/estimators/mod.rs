//! Steady-state diagnostics: renewal-reward truncated means, divergence
//! classification, tail-shape classification and the Lyapunov drift probe.
//!
//! All accumulators consume one replication sequentially and merge across
//! replications.

pub mod divergence;
pub mod drift;
pub mod renewal;
pub mod stats;
pub mod tail;

pub use divergence::{
    classify_divergence, classify_points, classify_with, Divergence, DivergenceReport,
};
pub use drift::{drift_probe, lyapunov_v, DriftAccumulator, DriftProbeReport, DriftVerdict};
pub use renewal::{
    top_half_slope, truncated_mean, CurveQuantity, CurveStatus, RenewalLedger, RenewalSummary,
    TruncatedMeanCurve,
};
pub use tail::{
    hill_estimate, hill_top_fraction, tail_classify, TailClass, TailReport, ValueHistogram,
};
