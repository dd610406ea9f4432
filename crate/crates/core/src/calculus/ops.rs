use std::fmt;
use std::sync::Arc;

use rand::RngCore;

use super::loss::{ExactLoss, MeasureKind, PrivacyLoss};
use super::maps::{PrivacyMap, StabilityMap};
use super::metric::{Domain, Metric, Value};
use crate::error::{Error, Result};

pub type TransformFn = Arc<dyn Fn(&Value) -> Result<Value> + Send + Sync>;
pub type MeasureFn = Arc<dyn Fn(&Value, &mut dyn RngCore) -> Result<Value> + Send + Sync>;
/// Exact output distribution of a discrete measurement on one input.
pub type PmfFn = Arc<dyn Fn(&Value) -> Result<Vec<(Value, f64)>> + Send + Sync>;

fn check_distance(d: f64) -> Result<()> {
    if d.is_nan() || d < 0.0 {
        return Err(Error::NegativeDistance(d));
    }
    Ok(())
}

/// A deterministic, stable map between metric spaces.
#[derive(Clone)]
pub struct Transformation {
    input_domain: Domain,
    output_domain: Domain,
    input_metric: Metric,
    output_metric: Metric,
    function: TransformFn,
    stability: StabilityMap,
}

impl Transformation {
    pub fn new(
        input_domain: Domain,
        output_domain: Domain,
        input_metric: Metric,
        output_metric: Metric,
        function: impl Fn(&Value) -> Result<Value> + Send + Sync + 'static,
        stability: StabilityMap,
    ) -> Result<Self> {
        Self::from_parts(input_domain, output_domain, input_metric, output_metric, Arc::new(function), stability)
    }

    pub(crate) fn from_parts(
        input_domain: Domain,
        output_domain: Domain,
        input_metric: Metric,
        output_metric: Metric,
        function: TransformFn,
        stability: StabilityMap,
    ) -> Result<Self> {
        input_metric.check_carrier(input_domain.carrier())?;
        output_metric.check_carrier(output_domain.carrier())?;
        stability.audit()?;
        Ok(Transformation { input_domain, output_domain, input_metric, output_metric, function, stability })
    }

    pub fn invoke(&self, x: &Value) -> Result<Value> {
        self.input_domain.check(x)?;
        (self.function)(x)
    }

    pub fn input_domain(&self) -> &Domain {
        &self.input_domain
    }

    pub fn output_domain(&self) -> &Domain {
        &self.output_domain
    }

    pub fn input_metric(&self) -> Metric {
        self.input_metric
    }

    pub fn output_metric(&self) -> Metric {
        self.output_metric
    }

    pub fn stability(&self) -> &StabilityMap {
        &self.stability
    }

    pub fn stability_at(&self, d_in: f64) -> Result<f64> {
        check_distance(d_in)?;
        Ok(self.stability.eval(d_in))
    }

    pub(crate) fn function(&self) -> &TransformFn {
        &self.function
    }
}

impl fmt::Debug for Transformation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Transformation")
            .field("input_domain", &self.input_domain.carrier())
            .field("output_domain", &self.output_domain.carrier())
            .field("input_metric", &self.input_metric)
            .field("output_metric", &self.output_metric)
            .field("stability", &self.stability)
            .finish()
    }
}

/// A randomized function with a privacy map. Its output depends on the
/// randomness source only through the stream it draws.
#[derive(Clone)]
pub struct Measurement {
    name: String,
    input_domain: Domain,
    input_metric: Metric,
    output_domain: Domain,
    function: MeasureFn,
    privacy: PrivacyMap,
    pmf: Option<PmfFn>,
}

impl Measurement {
    pub fn new(
        input_domain: Domain,
        input_metric: Metric,
        output_domain: Domain,
        measure: MeasureKind,
        function: impl Fn(&Value, &mut dyn RngCore) -> Result<Value> + Send + Sync + 'static,
        privacy: PrivacyMap,
    ) -> Result<Self> {
        Self::from_parts(input_domain, input_metric, output_domain, measure, Arc::new(function), privacy)
    }

    pub(crate) fn from_parts(
        input_domain: Domain,
        input_metric: Metric,
        output_domain: Domain,
        measure: MeasureKind,
        function: MeasureFn,
        privacy: PrivacyMap,
    ) -> Result<Self> {
        input_metric.check_carrier(input_domain.carrier())?;
        if privacy.measure() != measure {
            return Err(Error::InvalidPrivacyMap(format!(
                "map produces {:?} losses, measurement declares {measure:?}",
                privacy.measure()
            )));
        }
        privacy.audit()?;
        Ok(Measurement {
            name: "measurement".into(),
            input_domain,
            input_metric,
            output_domain,
            function,
            privacy,
            pmf: None,
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Attaches the exact output distribution used by exact verification.
    pub fn with_pmf(mut self, pmf: impl Fn(&Value) -> Result<Vec<(Value, f64)>> + Send + Sync + 'static) -> Self {
        self.pmf = Some(Arc::new(pmf));
        self
    }

    pub(crate) fn with_pmf_arc(mut self, pmf: Option<PmfFn>) -> Self {
        self.pmf = pmf;
        self
    }

    pub fn invoke(&self, x: &Value, rng: &mut dyn RngCore) -> Result<Value> {
        self.input_domain.check(x)?;
        (self.function)(x, rng)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn input_domain(&self) -> &Domain {
        &self.input_domain
    }

    pub fn input_metric(&self) -> Metric {
        self.input_metric
    }

    pub fn output_domain(&self) -> &Domain {
        &self.output_domain
    }

    pub fn output_measure(&self) -> MeasureKind {
        self.privacy.measure()
    }

    pub fn privacy(&self) -> &PrivacyMap {
        &self.privacy
    }

    pub fn loss_at(&self, d_in: f64) -> Result<PrivacyLoss> {
        check_distance(d_in)?;
        Ok(self.privacy.eval(d_in))
    }

    /// Exact loss at `d_in`, available when the privacy map is linear.
    pub fn exact_loss_at(&self, d_in: f64) -> Result<Option<ExactLoss>> {
        check_distance(d_in)?;
        Ok(self.privacy.exact_at(d_in))
    }

    pub fn is_enumerable(&self) -> bool {
        self.pmf.is_some()
    }

    pub fn output_distribution(&self, x: &Value) -> Result<Vec<(Value, f64)>> {
        let pmf = self.pmf.as_ref().ok_or(Error::NotEnumerable)?;
        self.input_domain.check(x)?;
        pmf(x)
    }

    pub(crate) fn function(&self) -> &MeasureFn {
        &self.function
    }

    pub(crate) fn pmf(&self) -> Option<&PmfFn> {
        self.pmf.as_ref()
    }

    /// Post-processing: applies a deterministic, data-independent `f` to the
    /// release. The privacy map is unchanged.
    pub fn map_output(
        &self,
        output_domain: Domain,
        f: impl Fn(Value) -> Result<Value> + Send + Sync + 'static,
    ) -> Measurement {
        let f = Arc::new(f);
        let inner = self.function.clone();
        let post = f.clone();
        let function: MeasureFn = Arc::new(move |x, rng| post(inner(x, rng)?));
        let pmf = self.pmf.clone().map(|p| {
            let post = f.clone();
            let pmf: PmfFn = Arc::new(move |x| {
                let mut out: Vec<(Value, f64)> = Vec::new();
                for (v, p) in p(x)? {
                    let y = post(v)?;
                    match out.iter_mut().find(|(o, _)| *o == y) {
                        Some(slot) => slot.1 += p,
                        None => out.push((y, p)),
                    }
                }
                Ok(out)
            });
            pmf
        });
        Measurement {
            name: self.name.clone(),
            input_domain: self.input_domain.clone(),
            input_metric: self.input_metric,
            output_domain,
            function,
            privacy: self.privacy.clone(),
            pmf,
        }
    }
}

impl fmt::Debug for Measurement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Measurement")
            .field("name", &self.name)
            .field("input_domain", &self.input_domain.carrier())
            .field("input_metric", &self.input_metric)
            .field("privacy", &self.privacy)
            .field("enumerable", &self.pmf.is_some())
            .finish()
    }
}
