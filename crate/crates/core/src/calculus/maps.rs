use std::fmt;
use std::sync::Arc;

use super::loss::{ExactLoss, MeasureKind, PrivacyLoss};
use crate::error::{Error, Result};
use crate::exact::{self, Rational};

/// Distances at which caller-supplied maps are audited for `map(0) = 0` and monotonicity.
pub const AUDIT_GRID: [f64; 10] = [0.0, 0.25, 0.5, 1.0, 2.0, 3.0, 4.0, 8.0, 16.0, 1000.0];

type DistanceFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
type LossFn = Arc<dyn Fn(f64) -> PrivacyLoss + Send + Sync>;

/// Bound on output distance as a function of input distance.
///
/// When the map is `d ↦ c·d` the constant `c` is kept exactly; combinators
/// compose such maps in closed form. Other maps compose as functions.
#[derive(Clone)]
pub struct StabilityMap {
    map: DistanceFn,
    linear: Option<Rational>,
}

impl StabilityMap {
    pub fn linear(c: f64) -> Result<Self> {
        if !c.is_finite() || c < 0.0 {
            return Err(Error::InvalidStabilityMap(format!("constant {c} must be finite and nonnegative")));
        }
        Ok(Self::linear_exact(exact::from_decimal(c)?))
    }

    pub fn linear_exact(c: Rational) -> Self {
        let cf = exact::to_f64(&c);
        let cc = c.clone();
        StabilityMap { map: Arc::new(move |d| scale_distance(&cc, cf, d)), linear: Some(c) }
    }

    /// A general monotone map. It is audited when used to build a transformation.
    pub fn from_fn(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        StabilityMap { map: Arc::new(f), linear: None }
    }

    pub fn eval(&self, d: f64) -> f64 {
        (self.map)(d)
    }

    pub fn linear_constant(&self) -> Option<&Rational> {
        self.linear.as_ref()
    }

    /// `outer ∘ inner`: apply `inner` first.
    pub fn compose(outer: &StabilityMap, inner: &StabilityMap) -> StabilityMap {
        match (&outer.linear, &inner.linear) {
            (Some(a), Some(b)) => StabilityMap::linear_exact(a * b),
            _ => {
                let (o, i) = (outer.map.clone(), inner.map.clone());
                StabilityMap { map: Arc::new(move |d| o(i(d))), linear: None }
            }
        }
    }

    pub fn audit(&self) -> Result<()> {
        let mut prev = 0.0;
        for &d in &AUDIT_GRID {
            let v = self.eval(d);
            if v.is_nan() || v < 0.0 {
                return Err(Error::InvalidStabilityMap(format!("map({d}) = {v}")));
            }
            if d == 0.0 && v != 0.0 {
                return Err(Error::InvalidStabilityMap(format!("map(0) = {v}, expected 0")));
            }
            if v < prev {
                return Err(Error::InvalidStabilityMap(format!("not monotone at d = {d}")));
            }
            prev = v;
        }
        Ok(())
    }
}

/// `c·d` with the product rounded once; infinite distances stay infinite unless c = 0.
fn scale_distance(c: &Rational, cf: f64, d: f64) -> f64 {
    if cf == 0.0 || d == 0.0 {
        return 0.0;
    }
    match exact::from_binary(d) {
        Ok(dr) => exact::to_f64(&(c * dr)),
        Err(_) => cf * d,
    }
}

impl fmt::Debug for StabilityMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.linear {
            Some(c) => write!(f, "StabilityMap(d ↦ {c}·d)"),
            None => f.write_str("StabilityMap(<fn>)"),
        }
    }
}

/// Bound on privacy loss as a function of input distance.
#[derive(Clone)]
pub struct PrivacyMap {
    measure: MeasureKind,
    map: LossFn,
    linear: Option<ExactLoss>,
}

impl PrivacyMap {
    /// `d ↦ d·per_unit` (for approximate DP this is the linear extension `(dε, dδ)`).
    pub fn linear(per_unit: PrivacyLoss) -> Result<Self> {
        Ok(Self::linear_exact(ExactLoss::from_decimal(&per_unit)?))
    }

    pub fn linear_exact(per_unit: ExactLoss) -> Self {
        let unit = per_unit.clone();
        let unit_f = per_unit.to_loss();
        PrivacyMap {
            measure: per_unit.measure,
            map: Arc::new(move |d| scale_loss(&unit, &unit_f, d)),
            linear: Some(per_unit),
        }
    }

    pub fn from_fn(measure: MeasureKind, f: impl Fn(f64) -> PrivacyLoss + Send + Sync + 'static) -> Self {
        PrivacyMap { measure, map: Arc::new(f), linear: None }
    }

    pub fn measure(&self) -> MeasureKind {
        self.measure
    }

    pub fn eval(&self, d: f64) -> PrivacyLoss {
        (self.map)(d)
    }

    pub fn linear_loss(&self) -> Option<&ExactLoss> {
        self.linear.as_ref()
    }

    /// Exact loss at `d` when the map is linear and `d` is finite.
    pub fn exact_at(&self, d: f64) -> Option<ExactLoss> {
        let unit = self.linear.as_ref()?;
        let dr = exact::from_binary(d).ok()?;
        Some(unit.scale(&dr))
    }

    /// `self ∘ stability`: the privacy map of a measurement run after a transformation.
    pub fn after(&self, stability: &StabilityMap) -> PrivacyMap {
        match (&self.linear, stability.linear_constant()) {
            (Some(unit), Some(c)) => PrivacyMap::linear_exact(unit.scale(c)),
            _ => {
                let (m, s) = (self.map.clone(), stability.clone());
                PrivacyMap { measure: self.measure, map: Arc::new(move |d| m(s.eval(d))), linear: None }
            }
        }
    }

    pub fn audit(&self) -> Result<()> {
        let mut prev = PrivacyLoss::zero(self.measure);
        for &d in &AUDIT_GRID {
            let l = self.eval(d);
            if l.measure() != self.measure {
                return Err(Error::InvalidPrivacyMap(format!("map({d}) is {l} under the wrong measure")));
            }
            l.validate().map_err(|e| Error::InvalidPrivacyMap(format!("map({d}): {e}")))?;
            if d == 0.0 && !l.is_zero() {
                return Err(Error::InvalidPrivacyMap(format!("map(0) = {l}, expected zero loss")));
            }
            if prev.dominated_by(&l) != Some(true) {
                return Err(Error::InvalidPrivacyMap(format!("not monotone at d = {d}")));
            }
            prev = l;
        }
        Ok(())
    }
}

fn scale_loss(unit: &ExactLoss, unit_f: &PrivacyLoss, d: f64) -> PrivacyLoss {
    if d == 0.0 || unit.is_zero() {
        return PrivacyLoss::zero(unit.measure);
    }
    match exact::from_binary(d) {
        Ok(dr) => {
            let l = unit.scale(&dr).to_loss();
            match l {
                PrivacyLoss::Approx { epsilon, delta } => PrivacyLoss::Approx { epsilon, delta: delta.min(1.0) },
                pure => pure,
            }
        }
        Err(_) => unit_f.scale(d),
    }
}

impl fmt::Debug for PrivacyMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.linear {
            Some(l) => write!(f, "PrivacyMap(d ↦ d·{})", l.to_loss()),
            None => write!(f, "PrivacyMap({:?}, <fn>)", self.measure),
        }
    }
}
