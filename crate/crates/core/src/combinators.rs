//! Chaining and composition.

use std::sync::Arc;

use crate::calculus::{
    DatasetDomain, Domain, ExactLoss, MeasureFn, MeasureKind, Measurement, Metric, PmfFn, PrivacyLoss, PrivacyMap,
    StabilityMap, TransformFn, Transformation, Value,
};
use crate::error::{Error, Result};
use crate::exact::Rational;
use crate::transforms::PartitionSpec;

/// Whether every value of `produced` is a member of `expected`. Dataset
/// domains must share a schema, and every bound `expected` demands must be
/// implied by a bound `produced` guarantees.
pub fn domain_feeds(produced: &Domain, expected: &Domain) -> bool {
    match (produced, expected) {
        (Domain::Dataset(p), Domain::Dataset(e)) => dataset_feeds(p, e),
        (Domain::DatasetVector { pieces: pn, inner: pi }, Domain::DatasetVector { pieces: en, inner: ei }) => {
            pn == en && dataset_feeds(pi, ei)
        }
        (Domain::Tuple(ps), Domain::Tuple(es)) => {
            ps.len() == es.len() && ps.iter().zip(es).all(|(p, e)| domain_feeds(p, e))
        }
        (p, e) => p.carrier() == e.carrier() && !matches!(p, Domain::Tuple(_)),
    }
}

fn dataset_feeds(p: &DatasetDomain, e: &DatasetDomain) -> bool {
    p.schema() == e.schema()
        && e.schema().columns().iter().all(|c| match e.bounds(&c.name) {
            None => true,
            Some(need) => p.bounds(&c.name).is_some_and(|have| have.within(&need)),
        })
}

fn check_link(out_domain: &Domain, out_metric: Metric, in_domain: &Domain, in_metric: Metric) -> Result<()> {
    if out_metric != in_metric {
        return Err(Error::DomainMismatch(format!("metric {out_metric:?} feeds a stage expecting {in_metric:?}")));
    }
    if !domain_feeds(out_domain, in_domain) {
        return Err(Error::DomainMismatch(format!(
            "{:?} output does not lie in the next stage's {:?} input domain",
            out_domain.carrier(),
            in_domain.carrier()
        )));
    }
    Ok(())
}

/// `t2 ∘ t1`: run `t1`, then `t2`. Stability maps compose; linear constants multiply.
pub fn chain_tt(t2: &Transformation, t1: &Transformation) -> Result<Transformation> {
    check_link(t1.output_domain(), t1.output_metric(), t2.input_domain(), t2.input_metric())?;
    let (f1, f2) = (t1.function().clone(), t2.function().clone());
    let function: TransformFn = Arc::new(move |x| f2(&f1(x)?));
    Transformation::from_parts(
        t1.input_domain().clone(),
        t2.output_domain().clone(),
        t1.input_metric(),
        t2.output_metric(),
        function,
        StabilityMap::compose(t2.stability(), t1.stability()),
    )
}

/// `m ∘ t`: the privacy map becomes `m.privacy ∘ t.stability`.
pub fn chain_mt(m: &Measurement, t: &Transformation) -> Result<Measurement> {
    check_link(t.output_domain(), t.output_metric(), m.input_domain(), m.input_metric())?;
    let (ft, fm) = (t.function().clone(), m.function().clone());
    let function: MeasureFn = Arc::new(move |x, rng| fm(&ft(x)?, rng));
    let pmf = m.pmf().cloned().map(|p| {
        let ft = t.function().clone();
        let pmf: PmfFn = Arc::new(move |x| p(&ft(x)?));
        pmf
    });
    Ok(Measurement::from_parts(
        t.input_domain().clone(),
        t.input_metric(),
        m.output_domain().clone(),
        m.output_measure(),
        function,
        m.privacy().after(t.stability()),
    )?
    .with_name(m.name().to_string())
    .with_pmf_arc(pmf))
}

/// An ordered list of transformations closed by one measurement.
#[derive(Debug, Clone)]
pub struct Pipeline {
    stages: Vec<Transformation>,
    measurement: Measurement,
}

impl Pipeline {
    pub fn new(stages: Vec<Transformation>, measurement: Measurement) -> Result<Self> {
        for w in stages.windows(2) {
            check_link(w[0].output_domain(), w[0].output_metric(), w[1].input_domain(), w[1].input_metric())?;
        }
        if let Some(last) = stages.last() {
            check_link(
                last.output_domain(),
                last.output_metric(),
                measurement.input_domain(),
                measurement.input_metric(),
            )?;
        }
        Ok(Pipeline { stages, measurement })
    }

    pub fn stages(&self) -> &[Transformation] {
        &self.stages
    }

    /// Folds the stages into a single measurement.
    pub fn build(&self) -> Result<Measurement> {
        let mut iter = self.stages.iter();
        let Some(first) = iter.next() else {
            return Ok(self.measurement.clone());
        };
        let mut t = first.clone();
        for next in iter {
            t = chain_tt(next, &t)?;
        }
        chain_mt(&self.measurement, &t)
    }
}

fn sum_losses(losses: impl IntoIterator<Item = PrivacyLoss>, measure: MeasureKind) -> PrivacyLoss {
    losses.into_iter().fold(PrivacyLoss::zero(measure), |acc, l| acc.add(&l).unwrap_or(acc))
}

/// Product distribution of independent components, as tuples.
fn product_pmf(pmfs: Vec<PmfFn>) -> PmfFn {
    Arc::new(move |x| {
        let mut out: Vec<(Vec<Value>, f64)> = vec![(Vec::new(), 1.0)];
        for p in &pmfs {
            let dist = p(x)?;
            let mut next = Vec::with_capacity(out.len() * dist.len());
            for (prefix, q) in &out {
                for (v, r) in &dist {
                    let mut t = prefix.clone();
                    t.push(v.clone());
                    next.push((t, q * r));
                }
            }
            out = next;
        }
        Ok(out.into_iter().map(|(v, p)| (Value::Tuple(v), p)).collect())
    })
}

/// Basic composition: runs every measurement on the same input, in order,
/// and releases the tuple of results. Losses add.
pub fn compose_basic(ms: &[Measurement]) -> Result<Measurement> {
    let first = ms.first().ok_or_else(|| Error::InvalidArity("composition needs a measurement".into()))?;
    let measure = first.output_measure();
    for m in &ms[1..] {
        if m.output_measure() != measure {
            return Err(Error::HeterogeneousMeasures);
        }
        if m.input_metric() != first.input_metric() || m.input_domain() != first.input_domain() {
            return Err(Error::DomainMismatch("composed measurements must share an input domain and metric".into()));
        }
    }
    let privacy = match ms.iter().map(|m| m.privacy().linear_loss().cloned()).collect::<Option<Vec<ExactLoss>>>() {
        Some(units) => {
            let mut total = ExactLoss::zero(measure);
            for u in &units {
                total = total.add(u)?;
            }
            if measure == MeasureKind::ApproxDp && total.delta > crate::exact::one() {
                let maps: Vec<PrivacyMap> = ms.iter().map(|m| m.privacy().clone()).collect();
                PrivacyMap::from_fn(measure, move |d| sum_losses(maps.iter().map(|p| p.eval(d)), measure))
            } else {
                PrivacyMap::linear_exact(total)
            }
        }
        None => {
            let maps: Vec<PrivacyMap> = ms.iter().map(|m| m.privacy().clone()).collect();
            PrivacyMap::from_fn(measure, move |d| sum_losses(maps.iter().map(|p| p.eval(d)), measure))
        }
    };
    let fs: Vec<MeasureFn> = ms.iter().map(|m| m.function().clone()).collect();
    let function: MeasureFn =
        Arc::new(move |x, rng| Ok(Value::Tuple(fs.iter().map(|f| f(x, rng)).collect::<Result<_>>()?)));
    let pmf = ms.iter().map(|m| m.pmf().cloned()).collect::<Option<Vec<_>>>().map(product_pmf);
    let names: Vec<&str> = ms.iter().map(|m| m.name()).collect();
    Ok(Measurement::from_parts(
        first.input_domain().clone(),
        first.input_metric(),
        Domain::Tuple(ms.iter().map(|m| m.output_domain().clone()).collect()),
        measure,
        function,
        privacy,
    )?
    .with_name(format!("compose[{}]", names.join(", ")))
    .with_pmf_arc(pmf))
}

/// Parallel composition: partitions the input with `spec` and runs `ms[i]`
/// on piece `i`. Under symmetric distance the loss at `d` is `d` times the
/// largest per-piece loss at distance one; a changed record can touch two
/// pieces, so change-one distance doubles it.
pub fn compose_parallel(
    input: &DatasetDomain,
    metric: Metric,
    spec: PartitionSpec,
    ms: &[Measurement],
) -> Result<Measurement> {
    if ms.len() != spec.len() {
        return Err(Error::ArityMismatch { expected: spec.len(), actual: ms.len() });
    }
    if !metric.is_dataset_metric() {
        return Err(Error::IncompatibleMetric { metric, carrier: crate::calculus::Carrier::Dataset });
    }
    let first = ms.first().ok_or_else(|| Error::InvalidArity("a partition needs at least one piece".into()))?;
    let measure = first.output_measure();
    let piece_domain = Domain::Dataset(input.clone());
    for m in ms {
        if m.output_measure() != measure {
            return Err(Error::HeterogeneousMeasures);
        }
        check_link(&piece_domain, Metric::SymmetricDistance, m.input_domain(), m.input_metric())?;
    }
    let factor = Rational::from_integer(if metric == Metric::ChangeOneDistance { 2.into() } else { 1.into() });
    let factor_f = crate::exact::to_f64(&factor);
    let privacy = match ms.iter().map(|m| m.privacy().linear_loss().cloned()).collect::<Option<Vec<ExactLoss>>>() {
        Some(units) => {
            let mut worst = ExactLoss::zero(measure);
            for u in &units {
                worst = worst.max(u)?;
            }
            PrivacyMap::linear_exact(worst.scale(&factor))
        }
        None => {
            let maps: Vec<PrivacyMap> = ms.iter().map(|m| m.privacy().clone()).collect();
            PrivacyMap::from_fn(measure, move |d| sum_losses(maps.iter().map(|p| p.eval(factor_f * d)), measure))
        }
    };
    let split_spec = spec.clone();
    let fs: Vec<MeasureFn> = ms.iter().map(|m| m.function().clone()).collect();
    let domains: Vec<Domain> = ms.iter().map(|m| m.input_domain().clone()).collect();
    let function: MeasureFn = Arc::new(move |x, rng| {
        let pieces = split_spec.split(x.as_dataset()?)?;
        let mut out = Vec::with_capacity(pieces.len());
        for ((piece, f), dom) in pieces.into_iter().zip(&fs).zip(&domains) {
            let v = Value::Dataset(piece);
            dom.check(&v)?;
            out.push(f(&v, rng)?);
        }
        Ok(Value::Tuple(out))
    });
    let pmf = ms.iter().map(|m| m.pmf().cloned()).collect::<Option<Vec<_>>>().map(|pmfs| {
        let spec = spec.clone();
        let pmf: PmfFn = Arc::new(move |x| {
            let pieces = spec.split(x.as_dataset()?)?;
            let per_piece: Vec<PmfFn> = pieces
                .into_iter()
                .zip(&pmfs)
                .map(|(piece, p)| {
                    let (p, v) = (p.clone(), Value::Dataset(piece));
                    let f: PmfFn = Arc::new(move |_| p(&v));
                    f
                })
                .collect();
            product_pmf(per_piece)(x)
        });
        pmf
    });
    let names: Vec<&str> = ms.iter().map(|m| m.name()).collect();
    Ok(Measurement::from_parts(
        Domain::Dataset(input.clone()),
        metric,
        Domain::Tuple(ms.iter().map(|m| m.output_domain().clone()).collect()),
        measure,
        function,
        privacy,
    )?
    .with_name(format!("parallel[{}]", names.join(", ")))
    .with_pmf_arc(pmf))
}

/// Reads a pure-DP measurement as approximate DP with δ = 0.
pub fn to_approx(m: &Measurement) -> Result<Measurement> {
    if m.output_measure() == MeasureKind::ApproxDp {
        return Ok(m.clone());
    }
    let privacy = match m.privacy().linear_loss() {
        Some(unit) => PrivacyMap::linear_exact(ExactLoss { measure: MeasureKind::ApproxDp, ..unit.clone() }),
        None => {
            let p = m.privacy().clone();
            PrivacyMap::from_fn(MeasureKind::ApproxDp, move |d| PrivacyLoss::Approx {
                epsilon: p.eval(d).epsilon(),
                delta: 0.0,
            })
        }
    };
    Ok(Measurement::from_parts(
        m.input_domain().clone(),
        m.input_metric(),
        m.output_domain().clone(),
        MeasureKind::ApproxDp,
        m.function().clone(),
        privacy,
    )?
    .with_name(m.name().to_string())
    .with_pmf_arc(m.pmf().cloned()))
}
