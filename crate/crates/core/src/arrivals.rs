//! IID batch-arrival laws with exact means and declared tail classes.
//!
//! A law is *heavy-tailed* when its second moment is infinite and
//! *exponential-type* when some exponential moment `E[exp(θA)]` is finite.
//! The only heavy family is the Bernoulli-thinned zeta law: zero with
//! probability `1 - p`, otherwise `K` with `P(K = k) = k^{-s}/ζ(s)`. For
//! `s ∈ (2, 3)` it has mean `p·ζ(s-1)/ζ(s)`, infinite variance, and a finite
//! `(1+γ)`-moment for every `γ < s - 2`.

use std::fmt;
use std::sync::Arc;

use rand_distr::Distribution;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::rng::StreamRng;
use crate::zeta::{zeta, ZetaTable};

/// Tolerance between a declared mean and the law's analytic mean.
pub const DECLARED_MEAN_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ArrivalLaw {
    Bernoulli {
        p: f64,
    },
    /// Geometric on `{0, 1, 2, ...}` with the given mean.
    Geometric {
        mean: f64,
    },
    Poisson {
        rate: f64,
    },
    BernoulliZeta {
        p: f64,
        s: f64,
    },
    /// Cycles through `pattern`, one entry per draw.
    Deterministic {
        pattern: Vec<u64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailClass {
    Heavy,
    ExponentialType,
}

/// A moment that may be infinite. Serializes as a number or `"infinite"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Moment {
    Finite(f64),
    Infinite,
}

impl Moment {
    pub fn is_infinite(self) -> bool {
        matches!(self, Moment::Infinite)
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Moment::Finite(v) => Some(v),
            Moment::Infinite => None,
        }
    }
}

impl Serialize for Moment {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Moment::Finite(v) => ser.serialize_f64(*v),
            Moment::Infinite => ser.serialize_str("infinite"),
        }
    }
}

impl<'de> Deserialize<'de> for Moment {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(de)? {
            Raw::Num(v) => Ok(Moment::Finite(v)),
            Raw::Str(s) if s == "infinite" => Ok(Moment::Infinite),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("bad moment {s:?}"))),
        }
    }
}

impl fmt::Display for Moment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Moment::Finite(v) => write!(f, "{v}"),
            Moment::Infinite => f.write_str("inf"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub mean: f64,
    pub second_moment: Moment,
    /// Largest `γ` with `E[A^{1+γ}] < ∞` (supremum; not attained for zeta).
    pub gamma_max: Moment,
}

/// Law family used by [`calibrate_rate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum LawFamily {
    Bernoulli,
    Geometric,
    Poisson,
    BernoulliZeta { s: f64 },
}

/// A validated arrival law together with its analytic mean and tail class.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalSpec {
    law: ArrivalLaw,
    declared_mean: f64,
    tail_class: TailClass,
}

fn check_prob(p: f64, what: &str) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::config(format!(
            "{what}: probability {p} outside [0, 1]"
        )));
    }
    Ok(())
}

fn check_zeta_exponent(s: f64) -> Result<()> {
    if !(s > 2.0 && s < 3.0) {
        return Err(Error::config(format!(
            "bernoulli_zeta: exponent s = {s} must lie in (2, 3)"
        )));
    }
    Ok(())
}

/// `ζ(s-1)/ζ(s)`, the mean of the (unthinned) zeta law.
pub fn zeta_law_mean(s: f64) -> Result<f64> {
    check_zeta_exponent(s)?;
    let num = zeta(s - 1.0).ok_or_else(|| Error::config("zeta series diverges"))?;
    let den = zeta(s).ok_or_else(|| Error::config("zeta series diverges"))?;
    Ok(num / den)
}

impl ArrivalLaw {
    fn validate(&self) -> Result<()> {
        match *self {
            ArrivalLaw::Bernoulli { p } => check_prob(p, "bernoulli"),
            ArrivalLaw::Geometric { mean } => {
                if !(mean.is_finite() && mean >= 0.0) {
                    return Err(Error::config(format!("geometric: bad mean {mean}")));
                }
                Ok(())
            }
            ArrivalLaw::Poisson { rate } => {
                if !(rate.is_finite() && rate >= 0.0) {
                    return Err(Error::config(format!("poisson: bad rate {rate}")));
                }
                Ok(())
            }
            ArrivalLaw::BernoulliZeta { p, s } => {
                check_prob(p, "bernoulli_zeta")?;
                check_zeta_exponent(s)
            }
            ArrivalLaw::Deterministic { ref pattern } => {
                if pattern.is_empty() {
                    return Err(Error::config("deterministic: empty pattern"));
                }
                Ok(())
            }
        }
    }

    fn tail_class(&self) -> TailClass {
        match self {
            ArrivalLaw::BernoulliZeta { .. } => TailClass::Heavy,
            _ => TailClass::ExponentialType,
        }
    }
}

/// Closed-form (or zeta-series) moments of a law.
pub fn analytic_moments(spec: &ArrivalSpec) -> Result<MomentReport> {
    law_moments(&spec.law)
}

fn law_moments(law: &ArrivalLaw) -> Result<MomentReport> {
    law.validate()?;
    let report = match *law {
        ArrivalLaw::Bernoulli { p } => MomentReport {
            mean: p,
            second_moment: Moment::Finite(p),
            gamma_max: Moment::Infinite,
        },
        ArrivalLaw::Geometric { mean } => MomentReport {
            mean,
            second_moment: Moment::Finite(mean + 2.0 * mean * mean),
            gamma_max: Moment::Infinite,
        },
        ArrivalLaw::Poisson { rate } => MomentReport {
            mean: rate,
            second_moment: Moment::Finite(rate + rate * rate),
            gamma_max: Moment::Infinite,
        },
        ArrivalLaw::BernoulliZeta { p, s } => MomentReport {
            mean: p * zeta_law_mean(s)?,
            // Σ k² k^{-s} diverges for s ≤ 3.
            second_moment: if p > 0.0 {
                Moment::Infinite
            } else {
                Moment::Finite(0.0)
            },
            gamma_max: if p > 0.0 {
                Moment::Finite(s - 2.0)
            } else {
                Moment::Infinite
            },
        },
        ArrivalLaw::Deterministic { ref pattern } => {
            let n = pattern.len() as f64;
            let mean = pattern.iter().map(|&a| a as f64).sum::<f64>() / n;
            let second = pattern.iter().map(|&a| (a as f64).powi(2)).sum::<f64>() / n;
            MomentReport {
                mean,
                second_moment: Moment::Finite(second),
                gamma_max: Moment::Infinite,
            }
        }
    };
    Ok(report)
}

impl ArrivalSpec {
    pub fn new(law: ArrivalLaw) -> Result<Self> {
        let moments = law_moments(&law)?;
        let tail_class = law.tail_class();
        Ok(Self {
            law,
            declared_mean: moments.mean,
            tail_class,
        })
    }

    pub fn bernoulli(p: f64) -> Result<Self> {
        Self::new(ArrivalLaw::Bernoulli { p })
    }

    pub fn geometric(mean: f64) -> Result<Self> {
        Self::new(ArrivalLaw::Geometric { mean })
    }

    pub fn poisson(rate: f64) -> Result<Self> {
        Self::new(ArrivalLaw::Poisson { rate })
    }

    pub fn bernoulli_zeta(p: f64, s: f64) -> Result<Self> {
        Self::new(ArrivalLaw::BernoulliZeta { p, s })
    }

    pub fn deterministic(pattern: Vec<u64>) -> Result<Self> {
        Self::new(ArrivalLaw::Deterministic { pattern })
    }

    pub fn law(&self) -> &ArrivalLaw {
        &self.law
    }

    pub fn declared_mean(&self) -> f64 {
        self.declared_mean
    }

    pub fn tail_class(&self) -> TailClass {
        self.tail_class
    }

    pub fn is_heavy(&self) -> bool {
        self.tail_class == TailClass::Heavy
    }

    /// The family this spec belongs to, for recalibration; `None` for
    /// deterministic patterns.
    pub fn family(&self) -> Option<LawFamily> {
        match self.law {
            ArrivalLaw::Bernoulli { .. } => Some(LawFamily::Bernoulli),
            ArrivalLaw::Geometric { .. } => Some(LawFamily::Geometric),
            ArrivalLaw::Poisson { .. } => Some(LawFamily::Poisson),
            ArrivalLaw::BernoulliZeta { s, .. } => Some(LawFamily::BernoulliZeta { s }),
            ArrivalLaw::Deterministic { .. } => None,
        }
    }

    pub fn sampler(&self) -> ArrivalSampler {
        ArrivalSampler::new(self)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    law: ArrivalLaw,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    declared_mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tail_class: Option<TailClass>,
}

impl Serialize for ArrivalSpec {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        RawSpec {
            law: self.law.clone(),
            declared_mean: Some(self.declared_mean),
            tail_class: Some(self.tail_class),
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for ArrivalSpec {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = RawSpec::deserialize(de)?;
        let spec = ArrivalSpec::new(raw.law).map_err(D::Error::custom)?;
        if let Some(m) = raw.declared_mean {
            if (m - spec.declared_mean).abs() > DECLARED_MEAN_TOLERANCE {
                return Err(D::Error::custom(format!(
                    "declared_mean {m} differs from analytic mean {}",
                    spec.declared_mean
                )));
            }
        }
        if let Some(c) = raw.tail_class {
            if c != spec.tail_class {
                return Err(D::Error::custom(format!(
                    "declared tail_class {c:?} does not match law ({:?})",
                    spec.tail_class
                )));
            }
        }
        Ok(spec)
    }
}

/// Returns a spec of the given family whose analytic mean is `target_mean`.
pub fn calibrate_rate(target_mean: f64, family: LawFamily) -> Result<ArrivalSpec> {
    if !(target_mean.is_finite() && target_mean >= 0.0) {
        return Err(Error::config(format!(
            "target mean {target_mean} must be finite and >= 0"
        )));
    }
    let law = match family {
        LawFamily::Bernoulli => {
            if target_mean > 1.0 {
                return Err(Error::config(format!(
                    "bernoulli cannot reach mean {target_mean} (max 1)"
                )));
            }
            ArrivalLaw::Bernoulli { p: target_mean }
        }
        LawFamily::Geometric => ArrivalLaw::Geometric { mean: target_mean },
        LawFamily::Poisson => ArrivalLaw::Poisson { rate: target_mean },
        LawFamily::BernoulliZeta { s } => {
            let max_mean = zeta_law_mean(s)?;
            if target_mean > max_mean {
                return Err(Error::config(format!(
                    "bernoulli_zeta(s = {s}) cannot reach mean {target_mean} (max {max_mean})"
                )));
            }
            ArrivalLaw::BernoulliZeta {
                p: target_mean / max_mean,
                s,
            }
        }
    };
    ArrivalSpec::new(law)
}

/// Stateful sampler for one arrival stream.
///
/// Only the deterministic law carries state (its position in the pattern);
/// all randomness comes from the rng passed to [`ArrivalSampler::sample`].
#[derive(Debug, Clone)]
pub enum ArrivalSampler {
    Zero,
    Bernoulli(f64),
    Geometric(rand_distr::Geometric),
    Poisson(rand_distr::Poisson<f64>),
    Zeta { p: f64, table: Arc<ZetaTable> },
    Deterministic { pattern: Vec<u64>, pos: usize },
}

impl ArrivalSampler {
    pub fn new(spec: &ArrivalSpec) -> Self {
        match spec.law {
            ArrivalLaw::Bernoulli { p } => ArrivalSampler::Bernoulli(p),
            ArrivalLaw::Geometric { mean } if mean == 0.0 => ArrivalSampler::Zero,
            ArrivalLaw::Geometric { mean } => ArrivalSampler::Geometric(
                rand_distr::Geometric::new(1.0 / (1.0 + mean)).expect("validated mean"),
            ),
            ArrivalLaw::Poisson { rate } if rate == 0.0 => ArrivalSampler::Zero,
            ArrivalLaw::Poisson { rate } => {
                ArrivalSampler::Poisson(rand_distr::Poisson::new(rate).expect("validated rate"))
            }
            ArrivalLaw::BernoulliZeta { p, s } => ArrivalSampler::Zeta {
                p,
                table: ZetaTable::shared(s).expect("validated exponent"),
            },
            ArrivalLaw::Deterministic { ref pattern } => ArrivalSampler::Deterministic {
                pattern: pattern.clone(),
                pos: 0,
            },
        }
    }

    #[inline]
    pub fn sample(&mut self, rng: &mut StreamRng) -> u64 {
        match self {
            ArrivalSampler::Zero => 0,
            ArrivalSampler::Bernoulli(p) => u64::from(rng.unit() < *p),
            ArrivalSampler::Geometric(g) => g.sample(rng),
            ArrivalSampler::Poisson(d) => d.sample(rng) as u64,
            ArrivalSampler::Zeta { p, table } => {
                if rng.unit() < *p {
                    table.sample(rng)
                } else {
                    0
                }
            }
            ArrivalSampler::Deterministic { pattern, pos } => {
                let a = pattern[*pos];
                *pos = (*pos + 1) % pattern.len();
                a
            }
        }
    }
}
