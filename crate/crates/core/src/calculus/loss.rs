use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{self, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureKind {
    PureDp,
    ApproxDp,
}

/// A privacy loss under one privacy measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PrivacyLoss {
    Pure(f64),
    Approx { epsilon: f64, delta: f64 },
}

impl PrivacyLoss {
    pub fn pure(epsilon: f64) -> Result<Self> {
        let l = PrivacyLoss::Pure(epsilon);
        l.validate()?;
        Ok(l)
    }

    pub fn approx(epsilon: f64, delta: f64) -> Result<Self> {
        let l = PrivacyLoss::Approx { epsilon, delta };
        l.validate()?;
        Ok(l)
    }

    pub fn zero(kind: MeasureKind) -> Self {
        match kind {
            MeasureKind::PureDp => PrivacyLoss::Pure(0.0),
            MeasureKind::ApproxDp => PrivacyLoss::Approx { epsilon: 0.0, delta: 0.0 },
        }
    }

    pub fn measure(&self) -> MeasureKind {
        match self {
            PrivacyLoss::Pure(_) => MeasureKind::PureDp,
            PrivacyLoss::Approx { .. } => MeasureKind::ApproxDp,
        }
    }

    pub fn epsilon(&self) -> f64 {
        match *self {
            PrivacyLoss::Pure(e) | PrivacyLoss::Approx { epsilon: e, .. } => e,
        }
    }

    pub fn delta(&self) -> f64 {
        match *self {
            PrivacyLoss::Pure(_) => 0.0,
            PrivacyLoss::Approx { delta, .. } => delta,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.epsilon() == 0.0 && self.delta() == 0.0
    }

    /// ε ≥ 0 (infinity allowed, NaN not), δ ∈ [0, 1].
    pub fn validate(&self) -> Result<()> {
        let e = self.epsilon();
        if e.is_nan() || e < 0.0 {
            return Err(Error::InvalidLoss(format!("epsilon {e} must be nonnegative")));
        }
        let d = self.delta();
        if !(0.0..=1.0).contains(&d) {
            return Err(Error::InvalidLoss(format!("delta {d} must lie in [0, 1]")));
        }
        Ok(())
    }

    fn same_measure(&self, other: &Self) -> Result<()> {
        if self.measure() != other.measure() {
            return Err(Error::HeterogeneousMeasures);
        }
        Ok(())
    }

    /// Basic composition: ε's add, δ's add (capped at 1).
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_measure(other)?;
        Ok(match (*self, *other) {
            (PrivacyLoss::Pure(a), PrivacyLoss::Pure(b)) => PrivacyLoss::Pure(a + b),
            _ => PrivacyLoss::Approx {
                epsilon: self.epsilon() + other.epsilon(),
                delta: (self.delta() + other.delta()).min(1.0),
            },
        })
    }

    /// Componentwise maximum.
    pub fn max(&self, other: &Self) -> Result<Self> {
        self.same_measure(other)?;
        Ok(match (*self, *other) {
            (PrivacyLoss::Pure(a), PrivacyLoss::Pure(b)) => PrivacyLoss::Pure(a.max(b)),
            _ => PrivacyLoss::Approx {
                epsilon: self.epsilon().max(other.epsilon()),
                delta: self.delta().max(other.delta()),
            },
        })
    }

    /// Linear group-privacy extension `(dε, dδ)`.
    pub fn scale(&self, d: f64) -> Self {
        match *self {
            PrivacyLoss::Pure(e) => PrivacyLoss::Pure(scale_f64(e, d)),
            PrivacyLoss::Approx { epsilon, delta } => {
                PrivacyLoss::Approx { epsilon: scale_f64(epsilon, d), delta: scale_f64(delta, d).min(1.0) }
            }
        }
    }

    /// Componentwise `self ≤ other`; `None` across measures.
    pub fn dominated_by(&self, other: &Self) -> Option<bool> {
        if self.measure() != other.measure() {
            return None;
        }
        Some(self.epsilon() <= other.epsilon() && self.delta() <= other.delta())
    }
}

// 0 · ∞ = 0 here: a zero-cost component stays free at any distance.
fn scale_f64(x: f64, d: f64) -> f64 {
    if x == 0.0 || d == 0.0 {
        0.0
    } else {
        x * d
    }
}

impl PartialOrd for PrivacyLoss {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        use std::cmp::Ordering::*;
        if self.measure() != other.measure() {
            return None;
        }
        let e = self.epsilon().partial_cmp(&other.epsilon())?;
        let d = self.delta().partial_cmp(&other.delta())?;
        match (e, d) {
            (Equal, o) | (o, Equal) => Some(o),
            (a, b) if a == b => Some(a),
            _ => None,
        }
    }
}

impl fmt::Display for PrivacyLoss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PrivacyLoss::Pure(e) => write!(f, "ε={e}"),
            PrivacyLoss::Approx { epsilon, delta } => write!(f, "(ε={epsilon}, δ={delta})"),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LossRepr {
    epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    delta: Option<f64>,
}

impl Serialize for PrivacyLoss {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let repr = match *self {
            PrivacyLoss::Pure(e) => LossRepr { epsilon: e, delta: None },
            PrivacyLoss::Approx { epsilon, delta } => LossRepr { epsilon, delta: Some(delta) },
        };
        repr.serialize(s)
    }
}

impl<'de> Deserialize<'de> for PrivacyLoss {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = LossRepr::deserialize(d)?;
        let loss = match repr.delta {
            None => PrivacyLoss::Pure(repr.epsilon),
            Some(delta) => PrivacyLoss::Approx { epsilon: repr.epsilon, delta },
        };
        loss.validate().map_err(serde::de::Error::custom)?;
        Ok(loss)
    }
}

/// A privacy loss in exact rational arithmetic, used for linear constants and
/// budget ledgers. Infinite losses have no exact form.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ExactLoss {
    pub measure: MeasureKind,
    pub epsilon: Rational,
    pub delta: Rational,
}

impl ExactLoss {
    pub fn zero(measure: MeasureKind) -> Self {
        ExactLoss { measure, epsilon: exact::zero(), delta: exact::zero() }
    }

    pub fn pure(epsilon: Rational) -> Self {
        ExactLoss { measure: MeasureKind::PureDp, epsilon, delta: exact::zero() }
    }

    /// Reads the loss's floats as the decimals they print as.
    pub fn from_decimal(loss: &PrivacyLoss) -> Result<Self> {
        loss.validate()?;
        Ok(ExactLoss {
            measure: loss.measure(),
            epsilon: exact::from_decimal(loss.epsilon())?,
            delta: exact::from_decimal(loss.delta())?,
        })
    }

    /// Reads the loss's floats as their exact binary values.
    pub fn from_binary(loss: &PrivacyLoss) -> Result<Self> {
        loss.validate()?;
        Ok(ExactLoss {
            measure: loss.measure(),
            epsilon: exact::from_binary(loss.epsilon())?,
            delta: exact::from_binary(loss.delta())?,
        })
    }

    pub fn to_loss(&self) -> PrivacyLoss {
        match self.measure {
            MeasureKind::PureDp => PrivacyLoss::Pure(exact::to_f64(&self.epsilon)),
            MeasureKind::ApproxDp => {
                PrivacyLoss::Approx { epsilon: exact::to_f64(&self.epsilon), delta: exact::to_f64(&self.delta) }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.epsilon == exact::zero() && self.delta == exact::zero()
    }

    pub fn is_nonnegative(&self) -> bool {
        self.epsilon >= exact::zero() && self.delta >= exact::zero()
    }

    fn same_measure(&self, other: &Self) -> Result<()> {
        if self.measure != other.measure {
            return Err(Error::HeterogeneousMeasures);
        }
        Ok(())
    }

    /// Uncapped sum, so ledgers stay exact.
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_measure(other)?;
        Ok(ExactLoss {
            measure: self.measure,
            epsilon: &self.epsilon + &other.epsilon,
            delta: &self.delta + &other.delta,
        })
    }

    /// Componentwise `max(0, self - other)`.
    pub fn saturating_sub(&self, other: &Self) -> Result<Self> {
        self.same_measure(other)?;
        let z = exact::zero();
        Ok(ExactLoss {
            measure: self.measure,
            epsilon: exact::max(&(&self.epsilon - &other.epsilon), &z),
            delta: exact::max(&(&self.delta - &other.delta), &z),
        })
    }

    pub fn max(&self, other: &Self) -> Result<Self> {
        self.same_measure(other)?;
        Ok(ExactLoss {
            measure: self.measure,
            epsilon: exact::max(&self.epsilon, &other.epsilon),
            delta: exact::max(&self.delta, &other.delta),
        })
    }

    pub fn scale(&self, factor: &Rational) -> Self {
        ExactLoss { measure: self.measure, epsilon: &self.epsilon * factor, delta: &self.delta * factor }
    }

    /// Componentwise `self ≤ other`.
    pub fn dominated_by(&self, other: &Self) -> Result<bool> {
        self.same_measure(other)?;
        Ok(self.epsilon <= other.epsilon && self.delta <= other.delta)
    }

    /// Six-decimal rendering used by the REPL.
    pub fn render(&self) -> String {
        match self.measure {
            MeasureKind::PureDp => exact::render_fixed(&self.epsilon, 6),
            MeasureKind::ApproxDp => {
                format!("({}, {})", exact::render_fixed(&self.epsilon, 6), exact::render_fixed(&self.delta, 6))
            }
        }
    }
}
