//! Primitive measurements: Laplace noise on scalars and vectors, randomized
//! response on bits, and the assembled noisy count, sum and average.
//!
//! Laplace noise is sampled by inverse CDF on uniform doubles. Like most
//! textbook implementations this inherits the usual floating-point caveats;
//! no attempt is made to harden it against them.

use std::sync::Arc;

use rand::distributions::Open01;
use rand::{Rng, RngCore};

use crate::calculus::{
    CellKind, Column, DatasetDomain, Domain, ExactLoss, MeasureKind, Measurement, Metric, PrivacyMap, Record, Schema,
    Value,
};
use crate::combinators::{chain_mt, chain_tt, compose_basic};
use crate::error::{Error, Result};
use crate::exact::{self, Rational};
use crate::transforms;

/// Laplace noise scale `b`, paired with the exact privacy loss it buys per
/// unit of input distance (`1/b`, or `ε/c` when calibrated from a sensitivity).
#[derive(Debug, Clone, PartialEq)]
pub struct LaplaceScale {
    scale: f64,
    per_unit: Rational,
}

impl LaplaceScale {
    pub fn new(b: f64) -> Result<Self> {
        if !(b.is_finite() && b > 0.0) {
            return Err(Error::NonpositiveScale(b));
        }
        Ok(LaplaceScale { scale: b, per_unit: exact::one() / exact::from_decimal(b)? })
    }

    /// `b = c/ε` for sensitivity `c` and target `ε`.
    pub fn calibrated(sensitivity: f64, epsilon: f64) -> Result<Self> {
        check_epsilon(epsilon)?;
        if !(sensitivity.is_finite() && sensitivity > 0.0) {
            return Err(Error::InvalidSensitivity(sensitivity));
        }
        Self::calibrated_exact(&exact::from_decimal(sensitivity)?, &exact::from_decimal(epsilon)?)
    }

    pub(crate) fn calibrated_exact(sensitivity: &Rational, epsilon: &Rational) -> Result<Self> {
        let ratio = sensitivity / epsilon;
        let scale = exact::to_f64(&ratio);
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::NonpositiveScale(scale));
        }
        Ok(LaplaceScale { scale, per_unit: epsilon / sensitivity })
    }

    pub fn value(&self) -> f64 {
        self.scale
    }

    pub fn epsilon_per_unit(&self) -> &Rational {
        &self.per_unit
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::NonpositiveEpsilon(epsilon));
    }
    Ok(())
}

/// One draw from Laplace(0, b).
pub fn sample_laplace(rng: &mut dyn RngCore, b: f64) -> f64 {
    let u: f64 = rng.sample(Open01);
    if u < 0.5 {
        b * (2.0 * u).ln()
    } else {
        -b * (2.0 * (1.0 - u)).ln()
    }
}

/// `z ↦ z + Lap(b)` on scalars; privacy map `d ↦ d/b`.
pub fn laplace_noise(scale: &LaplaceScale) -> Result<Measurement> {
    let b = scale.value();
    Ok(Measurement::new(
        Domain::Scalar,
        Metric::AbsoluteDistance,
        Domain::Scalar,
        MeasureKind::PureDp,
        move |x, rng| Ok(Value::Scalar(x.as_scalar()? + sample_laplace(rng, b))),
        PrivacyMap::linear_exact(ExactLoss::pure(scale.per_unit.clone())),
    )?
    .with_name(format!("laplace(b={b})")))
}

/// Independent Laplace noise on every coordinate, for L1-stable vector queries.
pub fn laplace_vector(scale: &LaplaceScale) -> Result<Measurement> {
    let b = scale.value();
    Ok(Measurement::new(
        Domain::Vector,
        Metric::L1Distance,
        Domain::Vector,
        MeasureKind::PureDp,
        move |x, rng| Ok(Value::Vector(x.as_vector()?.iter().map(|v| v + sample_laplace(rng, b)).collect())),
        PrivacyMap::linear_exact(ExactLoss::pure(scale.per_unit.clone())),
    )?
    .with_name(format!("laplace_vector(b={b})")))
}

/// Reports the true bit with probability `p` and its flip otherwise;
/// ε = ln(p/(1-p)). Exposes its exact output distribution.
pub fn randomized_response(p: f64) -> Result<Measurement> {
    if !(0.5..1.0).contains(&p) {
        return Err(Error::InvalidProbability(p));
    }
    let epsilon = (p / (1.0 - p)).ln();
    let per_unit = ExactLoss::pure(exact::from_binary(epsilon)?);
    Ok(Measurement::new(
        Domain::Bit,
        Metric::AbsoluteDistance,
        Domain::Bit,
        MeasureKind::PureDp,
        move |x, rng| {
            let truth = x.as_bit()?;
            let keep = rng.gen::<f64>() < p;
            Ok(Value::Bit(if keep { truth } else { !truth }))
        },
        PrivacyMap::linear_exact(per_unit),
    )?
    .with_name(format!("randomized_response(p={p})"))
    .with_pmf(move |x| {
        let truth = x.as_bit()?;
        Ok(vec![(Value::Bit(truth), p), (Value::Bit(!truth), 1.0 - p)])
    }))
}

/// Laplace-noised record count: `laplace(1/ε) ∘ count`.
pub fn noisy_count(input: &DatasetDomain, metric: Metric, epsilon: f64) -> Result<Measurement> {
    check_epsilon(epsilon)?;
    noisy_count_exact(input, metric, &exact::from_decimal(epsilon)?)
}

pub(crate) fn noisy_count_exact(input: &DatasetDomain, metric: Metric, epsilon: &Rational) -> Result<Measurement> {
    let count = transforms::count(input, metric)?;
    let noise = laplace_noise(&LaplaceScale::calibrated_exact(&exact::one(), epsilon)?)?;
    Ok(chain_mt(&noise, &count)?.with_name(format!("noisy_count(epsilon={})", exact::to_f64(epsilon))))
}

/// clamp → sum → Laplace with scale `c/ε`, where `c` is the sum's sensitivity
/// under `metric`.
pub fn noisy_sum(
    input: &DatasetDomain,
    metric: Metric,
    column: &str,
    lower: f64,
    upper: f64,
    epsilon: f64,
) -> Result<Measurement> {
    check_epsilon(epsilon)?;
    noisy_sum_exact(input, metric, column, lower, upper, &exact::from_decimal(epsilon)?)
}

pub(crate) fn noisy_sum_exact(
    input: &DatasetDomain,
    metric: Metric,
    column: &str,
    lower: f64,
    upper: f64,
    epsilon: &Rational,
) -> Result<Measurement> {
    let clamp = transforms::clamp(input, metric, column, lower, upper)?;
    let bounded = clamp.output_domain().as_dataset()?.clone();
    let sum = transforms::sum_clamped(&bounded, metric, column, lower, upper)?;
    let c = sum.stability().linear_constant().cloned().expect("sum is linear");
    // a zero-sensitivity sum is constant; any scale keeps it private
    let c = if c == exact::zero() { exact::one() } else { c };
    let noise = laplace_noise(&LaplaceScale::calibrated_exact(&c, epsilon)?)?;
    Ok(chain_mt(&noise, &chain_tt(&sum, &clamp)?)?.with_name(format!(
        "noisy_sum(column={column}, lower={lower}, upper={upper}, epsilon={})",
        exact::to_f64(epsilon)
    )))
}

/// The post-processing step of [`noisy_average`]: quotient of the noisy sum
/// and noisy count, forced into `[-1, 1]`. A noisy count below one yields 0.
pub fn average_from_noisy(noisy_sum: f64, noisy_count: f64) -> f64 {
    if noisy_count < 1.0 || !noisy_count.is_finite() || !noisy_sum.is_finite() {
        0.0
    } else {
        (noisy_sum / noisy_count).clamp(-1.0, 1.0)
    }
}

pub type RecordValueFn = Arc<dyn Fn(&Record) -> Result<f64> + Send + Sync>;

/// Noisy average of `f` over records: `f` is applied per record, clamped to
/// `[-1, 1]`, and released as a noisy sum and a noisy count at `ε/2` each;
/// the quotient is post-processing.
pub fn noisy_average(
    input: &DatasetDomain,
    metric: Metric,
    f: impl Fn(&Record) -> Result<f64> + Send + Sync + 'static,
    epsilon: f64,
) -> Result<Measurement> {
    check_epsilon(epsilon)?;
    let value_schema = Schema::new(vec![Column { name: "value".into(), kind: CellKind::Float64 }])?;
    let to_value = transforms::map_rows(input, metric, value_schema, move |r| {
        let v = f(r)?;
        if !v.is_finite() {
            return Err(Error::RecordFunction(format!("average function returned {v}")));
        }
        Ok(Record(vec![crate::calculus::Cell::Float(v)]))
    })?;
    let values = to_value.output_domain().as_dataset()?.clone();
    let half = exact::from_decimal(epsilon)? / Rational::from_integer(2.into());
    let sum = noisy_sum_exact(&values, metric, "value", -1.0, 1.0, &half)?;
    let count = noisy_count_exact(&values, metric, &half)?;
    let pair = compose_basic(&[sum, count])?;
    let averaged = pair.map_output(Domain::Scalar, |v| {
        let parts = v.as_tuple()?;
        Ok(Value::Scalar(average_from_noisy(parts[0].as_scalar()?, parts[1].as_scalar()?)))
    });
    Ok(chain_mt(&averaged, &to_value)?.with_name(format!("noisy_average(epsilon={epsilon})")))
}

/// [`noisy_average`] of a numeric column.
pub fn noisy_average_column(input: &DatasetDomain, metric: Metric, column: &str, epsilon: f64) -> Result<Measurement> {
    let index = input.schema().numeric_index(column)?;
    noisy_average(input, metric, move |r| Ok(r.0[index].as_f64().unwrap_or(0.0)), epsilon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::{Dataset, PrivacyLoss};
    use crate::seeded_rng;

    fn floats_domain() -> DatasetDomain {
        DatasetDomain::new(Schema::of(&[("value", CellKind::Float64)]).unwrap())
    }

    #[test]
    fn laplace_privacy_map() {
        let m = laplace_noise(&LaplaceScale::calibrated(1.0, 0.5).unwrap()).unwrap();
        assert_eq!(m.loss_at(1.0).unwrap(), PrivacyLoss::Pure(0.5));
        assert!(m.loss_at(0.0).unwrap().is_zero());
        assert_eq!(LaplaceScale::new(0.0).unwrap_err(), Error::NonpositiveScale(0.0));
        assert!(LaplaceScale::new(f64::NAN).is_err());
        assert_eq!(LaplaceScale::new(4.0).unwrap().epsilon_per_unit(), &exact::from_decimal(0.25).unwrap());
    }

    #[test]
    fn laplace_is_replayable() {
        let m = laplace_noise(&LaplaceScale::new(1.0).unwrap()).unwrap();
        let a = m.invoke(&Value::Scalar(3.0), &mut seeded_rng(9)).unwrap();
        let b = m.invoke(&Value::Scalar(3.0), &mut seeded_rng(9)).unwrap();
        assert_eq!(a.as_scalar().unwrap().to_bits(), b.as_scalar().unwrap().to_bits());
    }

    #[test]
    fn randomized_response_epsilons() {
        assert_eq!(randomized_response(0.5).unwrap().loss_at(1.0).unwrap(), PrivacyLoss::Pure(0.0));
        let e = randomized_response(0.75).unwrap().loss_at(1.0).unwrap().epsilon();
        assert!((e - 3f64.ln()).abs() < 1e-15);
        let e = randomized_response(0.9).unwrap().loss_at(1.0).unwrap().epsilon();
        assert!((e - 9f64.ln()).abs() < 1e-14);
        for p in [0.49, 1.0, f64::NAN] {
            assert!(matches!(randomized_response(p), Err(Error::InvalidProbability(_))));
        }
    }

    #[test]
    fn randomized_response_pmf() {
        let m = randomized_response(0.75).unwrap();
        let d = m.output_distribution(&Value::Bit(true)).unwrap();
        assert_eq!(d, vec![(Value::Bit(true), 0.75), (Value::Bit(false), 0.25)]);
    }

    #[test]
    fn noisy_count_map_is_linear() {
        let m = noisy_count(&floats_domain(), Metric::SymmetricDistance, 0.3).unwrap();
        assert_eq!(m.loss_at(1.0).unwrap(), PrivacyLoss::Pure(0.3));
        assert_eq!(m.loss_at(3.0).unwrap(), PrivacyLoss::Pure(0.9));
        assert_eq!(m.exact_loss_at(1.0).unwrap().unwrap().epsilon, exact::from_decimal(0.3).unwrap());
        assert_eq!(
            noisy_count(&floats_domain(), Metric::SymmetricDistance, 0.0).unwrap_err(),
            Error::NonpositiveEpsilon(0.0)
        );
    }

    #[test]
    fn noisy_count_replays_under_seed() {
        let m = noisy_count(&floats_domain(), Metric::SymmetricDistance, 1.0).unwrap();
        let empty = Value::Dataset(Dataset::from_floats(&[]).unwrap());
        let a = m.invoke(&empty, &mut seeded_rng(0)).unwrap().as_scalar().unwrap();
        let b = m.invoke(&empty, &mut seeded_rng(0)).unwrap().as_scalar().unwrap();
        let noise = sample_laplace(&mut seeded_rng(0), 1.0);
        assert_eq!(a.to_bits(), b.to_bits());
        assert_eq!(a.to_bits(), (0.0 + noise).to_bits());
    }

    #[test]
    fn noisy_sum_scale_follows_sensitivity() {
        let m = noisy_sum(&floats_domain(), Metric::SymmetricDistance, "value", 0.0, 1.0, 0.5).unwrap();
        assert_eq!(m.loss_at(1.0).unwrap(), PrivacyLoss::Pure(0.5));
        assert!(m.loss_at(0.0).unwrap().is_zero());
        let m = noisy_sum(&floats_domain(), Metric::SymmetricDistance, "value", -2.0, 5.0, 0.1).unwrap();
        assert_eq!(m.loss_at(1.0).unwrap(), PrivacyLoss::Pure(0.1));
        assert_eq!(
            LaplaceScale::calibrated_exact(&exact::from_decimal(5.0).unwrap(), &exact::from_decimal(0.1).unwrap())
                .unwrap()
                .value(),
            50.0
        );
        assert!(matches!(
            noisy_sum(&floats_domain(), Metric::SymmetricDistance, "value", 1.0, 0.0, 1.0),
            Err(Error::BoundsInverted { .. })
        ));
    }

    #[test]
    fn noisy_average_budget_split() {
        let m = noisy_average_column(&floats_domain(), Metric::SymmetricDistance, "value", 0.8).unwrap();
        assert_eq!(m.loss_at(1.0).unwrap(), PrivacyLoss::Pure(0.8));
        assert_eq!(m.exact_loss_at(1.0).unwrap().unwrap().epsilon, exact::from_decimal(0.8).unwrap());
    }

    #[test]
    fn average_guard() {
        assert_eq!(average_from_noisy(5.0, 0.0), 0.0);
        assert_eq!(average_from_noisy(5.0, 0.99), 0.0);
        assert_eq!(average_from_noisy(-5.0, -3.0), 0.0);
        assert_eq!(average_from_noisy(5.0, 2.0), 1.0);
        assert_eq!(average_from_noisy(1.0, 4.0), 0.25);
    }

    #[test]
    fn noisy_average_of_empty_dataset_is_guarded() {
        let m = noisy_average_column(&floats_domain(), Metric::SymmetricDistance, "value", 1.0).unwrap();
        let empty = Value::Dataset(Dataset::from_floats(&[]).unwrap());
        for seed in 0..200 {
            let v = m.invoke(&empty, &mut seeded_rng(seed)).unwrap().as_scalar().unwrap();
            assert!((-1.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn noisy_average_clamps_to_unit_interval() {
        let m = noisy_average_column(&floats_domain(), Metric::SymmetricDistance, "value", 50.0).unwrap();
        let big = Value::Dataset(Dataset::from_floats(&[10.0; 200]).unwrap());
        let v = m.invoke(&big, &mut seeded_rng(3)).unwrap().as_scalar().unwrap();
        assert!((v - 1.0).abs() < 0.05, "{v}");
    }
}
