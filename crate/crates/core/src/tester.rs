//! Checking privacy claims.
//!
//! [`exact_divergence_check`] enumerates the output distribution of a
//! discrete measurement on every adjacent pair of a small input space and
//! computes the true divergence. [`stochastic_test`] is a black-box
//! hypothesis test for scalar-valued measurements. Passing it is evidence
//! that no violation was found, not a proof of privacy.

use rayon::prelude::*;
use serde::Serialize;

use crate::calculus::{
    Carrier, Cell, CellKind, Dataset, Domain, Measurement, Metric, PrivacyLoss, Record, Schema, Value,
};
use crate::error::{Error, Result};
use crate::{seeded_rng, NoiseRng};

/// Tolerance on claimed losses, absorbing rounding in the enumeration.
pub const EXACT_SLACK: f64 = 1e-12;
pub const MAX_EXACT_INPUTS: usize = 6;
pub const MIN_SAMPLES: usize = 10_000;
/// Interior quantiles of the pooled samples used as event thresholds.
pub const GRID_POINTS: usize = 19;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

/// Which inputs count as neighbours.
#[derive(Debug, Clone)]
pub enum Adjacency {
    /// Distinct inputs at distance at most one under the input metric.
    Metric,
    /// Explicit index pairs; each is checked in both directions.
    Pairs(Vec<(usize, usize)>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub x: Value,
    pub x_prime: Value,
    pub outcomes: Vec<Value>,
    pub p: f64,
    pub p_prime: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactReport {
    pub verdict: Verdict,
    /// Largest log-probability ratio over adjacent pairs and outcome sets.
    pub epsilon: f64,
    /// For approximate claims: the smallest δ valid at the claimed ε.
    pub delta_at_claim: f64,
    pub witness: Option<Witness>,
}

type Dist = Vec<(Value, f64)>;

fn prob(d: &Dist, o: &Value) -> f64 {
    d.iter().filter(|(v, _)| v == o).map(|(_, p)| p).sum()
}

fn support(a: &Dist, b: &Dist) -> Vec<Value> {
    let mut out: Vec<Value> = Vec::new();
    for (v, _) in a.iter().chain(b) {
        if !out.contains(v) {
            out.push(v.clone());
        }
    }
    out
}

fn adjacent_pairs(m: &Measurement, inputs: &[Value], adjacency: &Adjacency) -> Result<Vec<(usize, usize)>> {
    let mut pairs = Vec::new();
    match adjacency {
        Adjacency::Metric => {
            for i in 0..inputs.len() {
                for j in 0..inputs.len() {
                    let d = m.input_metric().distance(&inputs[i], &inputs[j])?;
                    if i != j && d > 0.0 && d <= 1.0 {
                        pairs.push((i, j));
                    }
                }
            }
        }
        Adjacency::Pairs(ps) => {
            for &(i, j) in ps {
                if i >= inputs.len() || j >= inputs.len() {
                    return Err(Error::InvalidArity(format!("pair ({i}, {j}) outside {} inputs", inputs.len())));
                }
                pairs.push((i, j));
                pairs.push((j, i));
            }
        }
    }
    Ok(pairs)
}

/// Verifies `claimed` for `m` by enumeration over at most six inputs.
///
/// A pure claim ε passes when every adjacent pair and outcome satisfies
/// `P[M(x) = o] ≤ e^ε P[M(x') = o]`. Sets need no separate check since the
/// worst set ratio is a singleton ratio. An approximate claim (ε, δ) passes
/// when the hockey-stick divergence at ε is at most δ.
pub fn exact_divergence_check(
    m: &Measurement,
    inputs: &[Value],
    adjacency: &Adjacency,
    claimed: &PrivacyLoss,
) -> Result<ExactReport> {
    claimed.validate()?;
    if inputs.len() > MAX_EXACT_INPUTS {
        return Err(Error::InputSpaceTooLarge(inputs.len()));
    }
    if !m.is_enumerable() {
        return Err(Error::NotEnumerable);
    }
    let dists = inputs.iter().map(|x| m.output_distribution(x)).collect::<Result<Vec<Dist>>>()?;
    let pairs = adjacent_pairs(m, inputs, adjacency)?;
    let bound = claimed.epsilon().exp();

    let mut epsilon = 0.0f64;
    let mut worst_ratio: Option<Witness> = None;
    let mut delta_at_claim = 0.0f64;
    let mut worst_delta: Option<Witness> = None;
    for &(i, j) in &pairs {
        let (a, b) = (&dists[i], &dists[j]);
        let outcomes = support(a, b);
        let mut excess = 0.0;
        let mut excess_set = Vec::new();
        let (mut pa, mut pb) = (0.0, 0.0);
        for o in &outcomes {
            let (p, q) = (prob(a, o), prob(b, o));
            let ratio = if p <= 0.0 {
                f64::NEG_INFINITY
            } else if q <= 0.0 {
                f64::INFINITY
            } else {
                (p / q).ln()
            };
            if ratio > epsilon || (worst_ratio.is_none() && ratio >= epsilon && p > 0.0) {
                epsilon = epsilon.max(ratio);
                worst_ratio = Some(Witness {
                    x: inputs[i].clone(),
                    x_prime: inputs[j].clone(),
                    outcomes: vec![o.clone()],
                    p,
                    p_prime: q,
                });
            }
            if p > bound * q {
                excess += p - bound * q;
                excess_set.push(o.clone());
                pa += p;
                pb += q;
            }
        }
        if excess > delta_at_claim {
            delta_at_claim = excess;
            worst_delta = Some(Witness {
                x: inputs[i].clone(),
                x_prime: inputs[j].clone(),
                outcomes: excess_set,
                p: pa,
                p_prime: pb,
            });
        }
    }

    let (verdict, witness) = match claimed {
        PrivacyLoss::Pure(e) => {
            if epsilon <= e + EXACT_SLACK {
                (Verdict::Pass, None)
            } else {
                (Verdict::Fail, worst_ratio)
            }
        }
        PrivacyLoss::Approx { delta, .. } => {
            if delta_at_claim <= delta + EXACT_SLACK {
                (Verdict::Pass, None)
            } else {
                (Verdict::Fail, worst_delta)
            }
        }
    };
    Ok(ExactReport { verdict, epsilon, delta_at_claim, witness })
}

/// Which side of the threshold an event covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Above,
    AtOrBelow,
}

/// A rejected `(x, x', event)` cell, with the RNG streams that produced it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Counterexample {
    pub x: Value,
    pub x_prime: Value,
    pub event: EventKind,
    pub threshold: f64,
    pub p: f64,
    pub p_prime: f64,
    pub p_value: f64,
    pub seed: u64,
    pub stream_x: u64,
    pub stream_x_prime: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairSummary {
    pub x: Value,
    pub x_prime: Value,
    pub thresholds: Vec<f64>,
    pub min_p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StochasticReport {
    pub verdict: Verdict,
    pub summary: String,
    pub claimed: PrivacyLoss,
    pub samples: usize,
    pub significance: f64,
    /// Number of (pair, event) cells; the per-cell level is `significance / tests`.
    pub tests: usize,
    pub pairs: Vec<PairSummary>,
    pub counterexample: Option<Counterexample>,
}

#[derive(Debug, Clone, Copy)]
pub struct StochasticConfig {
    pub samples: usize,
    pub significance: f64,
    pub seed: u64,
}

impl StochasticConfig {
    pub fn new(samples: usize, significance: f64, seed: u64) -> Result<Self> {
        if samples < MIN_SAMPLES {
            return Err(Error::InsufficientSamples { min: MIN_SAMPLES, actual: samples });
        }
        if !(significance > 0.0 && significance <= 0.1) {
            return Err(Error::InvalidSignificance(significance));
        }
        Ok(StochasticConfig { samples, significance, seed })
    }
}

fn record_of(schema: &Schema, v: i64) -> Record {
    Record(
        schema
            .columns()
            .iter()
            .map(|c| match c.kind {
                CellKind::Int64 => Cell::Int(v),
                CellKind::Float64 => Cell::Float(v as f64),
                CellKind::Bool => Cell::Bool(v % 2 != 0),
                CellKind::String => Cell::Str(v.to_string()),
            })
            .collect(),
    )
}

fn dataset_of(schema: &Schema, values: &[i64]) -> Result<Value> {
    Ok(Value::Dataset(Dataset::new(schema.clone(), values.iter().map(|&v| record_of(schema, v)).collect())?))
}

/// The fixed catalogue of neighbouring inputs for `m`: empty against
/// singleton, all-equal against one more or one fewer, and all-equal
/// against one record changed, over small datasets whose every column
/// holds the same small integer. Scalars, bits and vectors use a unit step.
pub fn candidate_pairs(m: &Measurement) -> Result<Vec<(Value, Value)>> {
    let unsupported =
        || Error::Unsupported(format!("no candidate inputs for {:?} domains", m.input_domain().carrier()));
    match m.input_domain() {
        Domain::Dataset(dom) => {
            if !dom.is_unbounded() {
                return Err(Error::Unsupported("candidate datasets ignore column bounds".into()));
            }
            let s = dom.schema();
            let pairs: &[(&[i64], &[i64])] = match m.input_metric() {
                Metric::SymmetricDistance => &[
                    (&[], &[1]),
                    (&[1, 1, 1, 1, 1], &[1, 1, 1, 1]),
                    (&[1, 1, 1, 1, 1], &[1, 1, 1, 1, 1, 1]),
                    (&[0, 1, 2, 3, 4], &[0, 1, 2, 3, 4, 5]),
                ],
                Metric::ChangeOneDistance => &[
                    (&[1], &[0]),
                    (&[1, 1, 1, 1, 1], &[1, 1, 1, 1, 2]),
                    (&[1, 1, 1, 1, 1], &[1, 1, 1, 1, 0]),
                    (&[0, 0, 0, 0, 0], &[0, 0, 0, 0, 10]),
                ],
                _ => return Err(unsupported()),
            };
            pairs.iter().map(|(a, b)| Ok((dataset_of(s, a)?, dataset_of(s, b)?))).collect()
        }
        Domain::Scalar => Ok(vec![(Value::Scalar(0.0), Value::Scalar(1.0))]),
        Domain::Bit => Ok(vec![(Value::Bit(false), Value::Bit(true))]),
        Domain::Vector => Ok(vec![
            (Value::Vector(vec![0.0]), Value::Vector(vec![1.0])),
            (Value::Vector(vec![0.0, 0.0]), Value::Vector(vec![0.5, 0.5])),
        ]),
        _ => Err(unsupported()),
    }
}

fn scalar_output(v: &Value) -> Result<f64> {
    match v {
        Value::Scalar(x) => Ok(*x),
        Value::Bit(b) => Ok(if *b { 1.0 } else { 0.0 }),
        other => Err(Error::Unsupported(format!("stochastic testing needs scalar outputs, got {:?}", other.carrier()))),
    }
}

/// `n` sorted output draws of `m` on `x` from stream `stream` of `seed`.
fn draw(m: &Measurement, x: &Value, n: usize, seed: u64, stream: u64) -> Result<Vec<f64>> {
    let mut rng: NoiseRng = seeded_rng(seed);
    rng.set_stream(stream);
    let mut out = (0..n).map(|_| scalar_output(&m.invoke(x, &mut rng)?)).collect::<Result<Vec<f64>>>()?;
    out.sort_by(f64::total_cmp);
    Ok(out)
}

fn fraction(sorted: &[f64], event: EventKind, t: f64) -> f64 {
    let at_or_below = sorted.partition_point(|&v| v <= t);
    let k = match event {
        EventKind::Above => sorted.len() - at_or_below,
        EventKind::AtOrBelow => at_or_below,
    };
    k as f64 / sorted.len() as f64
}

fn normal_sf(z: f64) -> f64 {
    0.5 * libm::erfc(z / std::f64::consts::SQRT_2)
}

/// One-sided p-value for `H0: p ≤ e^ε p' + δ` from sample frequencies.
fn cell_p_value(p: f64, p_prime: f64, n: f64, n_prime: f64, claimed: &PrivacyLoss) -> f64 {
    let k = claimed.epsilon().exp();
    let gap = p - k * p_prime - claimed.delta();
    let var = p * (1.0 - p) / n + k * k * p_prime * (1.0 - p_prime) / n_prime;
    if var <= 0.0 {
        return if gap > 0.0 { 0.0 } else { 1.0 };
    }
    normal_sf(gap / var.sqrt())
}

fn check_scalar_output(m: &Measurement) -> Result<()> {
    match m.output_domain().carrier() {
        Carrier::Scalar | Carrier::Bit => Ok(()),
        c => Err(Error::Unsupported(format!("stochastic testing needs scalar outputs, got {c:?}"))),
    }
}

/// Tests `claimed` for `m` over the [`candidate_pairs`] catalogue.
pub fn stochastic_test(m: &Measurement, claimed: &PrivacyLoss, config: &StochasticConfig) -> Result<StochasticReport> {
    let pairs = candidate_pairs(m)?;
    stochastic_test_pairs(m, &pairs, claimed, config)
}

/// Tests `claimed` on explicit neighbouring pairs. Each distinct input is
/// sampled once, from its own ChaCha stream, so results do not depend on
/// thread scheduling and any rejection can be replayed with [`replay`].
pub fn stochastic_test_pairs(
    m: &Measurement,
    pairs: &[(Value, Value)],
    claimed: &PrivacyLoss,
    config: &StochasticConfig,
) -> Result<StochasticReport> {
    claimed.validate()?;
    check_scalar_output(m)?;
    let StochasticConfig { samples, significance, seed } = *config;
    let events_per_pair = 4 * GRID_POINTS;
    let tests = pairs.len() * events_per_pair;
    let mut report = StochasticReport {
        verdict: Verdict::Pass,
        summary: String::new(),
        claimed: *claimed,
        samples,
        significance,
        tests,
        pairs: Vec::new(),
        counterexample: None,
    };
    if claimed.epsilon().is_infinite() {
        report.summary = "vacuous claim: infinite epsilon admits every mechanism".into();
        return Ok(report);
    }

    let mut inputs: Vec<&Value> = Vec::new();
    let mut pair_idx = Vec::with_capacity(pairs.len());
    for (a, b) in pairs {
        pair_idx.push((intern(&mut inputs, a), intern(&mut inputs, b)));
    }
    for v in &inputs {
        m.input_domain().check(v)?;
    }
    let draws =
        inputs.par_iter().enumerate().map(|(i, x)| draw(m, x, samples, seed, i as u64)).collect::<Result<Vec<_>>>()?;

    let level = significance / tests as f64;
    let n = samples as f64;
    let mut worst: Option<Counterexample> = None;
    for &(a, b) in &pair_idx {
        let thresholds = pooled_quantiles(&draws[a], &draws[b]);
        let mut min_p = 1.0f64;
        for &(first, second) in &[(a, b), (b, a)] {
            for event in [EventKind::Above, EventKind::AtOrBelow] {
                for &t in &thresholds {
                    let p = fraction(&draws[first], event, t);
                    let q = fraction(&draws[second], event, t);
                    let pv = cell_p_value(p, q, n, n, claimed);
                    min_p = min_p.min(pv);
                    if pv < level && worst.as_ref().is_none_or(|w| pv < w.p_value) {
                        worst = Some(Counterexample {
                            x: inputs[first].clone(),
                            x_prime: inputs[second].clone(),
                            event,
                            threshold: t,
                            p,
                            p_prime: q,
                            p_value: pv,
                            seed,
                            stream_x: first as u64,
                            stream_x_prime: second as u64,
                        });
                    }
                }
            }
        }
        report.pairs.push(PairSummary {
            x: inputs[a].clone(),
            x_prime: inputs[b].clone(),
            thresholds,
            min_p_value: min_p,
        });
    }
    match worst {
        Some(c) => {
            report.verdict = Verdict::Fail;
            report.summary = format!(
                "claim rejected: P[event] = {:.5} on x vs {:.5} on x' (p-value {:.3e} below per-test level {:.3e})",
                c.p, c.p_prime, c.p_value, level
            );
            report.counterexample = Some(c);
        }
        None => {
            report.summary = format!(
                "no violation detected in {tests} tests at overall significance {significance}; this is evidence, not proof"
            );
        }
    }
    Ok(report)
}

fn intern<'a>(inputs: &mut Vec<&'a Value>, v: &'a Value) -> usize {
    match inputs.iter().position(|u| *u == v) {
        Some(i) => i,
        None => {
            inputs.push(v);
            inputs.len() - 1
        }
    }
}

fn pooled_quantiles(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    pooled.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = (1..=GRID_POINTS).map(|k| pooled[(k * (pooled.len() - 1)) / (GRID_POINTS + 1)]).collect();
    out.dedup();
    out
}

/// Redraws the samples behind `c` and returns the p-value of its cell.
pub fn replay(m: &Measurement, c: &Counterexample, samples: usize, claimed: &PrivacyLoss) -> Result<f64> {
    let a = draw(m, &c.x, samples, c.seed, c.stream_x)?;
    let b = draw(m, &c.x_prime, samples, c.seed, c.stream_x_prime)?;
    let (p, q) = (fraction(&a, c.event, c.threshold), fraction(&b, c.event, c.threshold));
    Ok(cell_p_value(p, q, samples as f64, samples as f64, claimed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::{DatasetDomain, MeasureKind, PrivacyMap};
    use crate::combinators::compose_basic;
    use crate::mechanisms::{laplace_noise, noisy_count, randomized_response, LaplaceScale};

    fn bits() -> Vec<Value> {
        vec![Value::Bit(false), Value::Bit(true)]
    }

    #[test]
    fn randomized_response_exact() {
        let rr = randomized_response(0.75).unwrap();
        let ok = exact_divergence_check(&rr, &bits(), &Adjacency::Metric, &PrivacyLoss::Pure(1.0986123)).unwrap();
        assert_eq!(ok.verdict, Verdict::Pass);
        assert!((ok.epsilon - 3f64.ln()).abs() < 1e-12);
        let bad = exact_divergence_check(&rr, &bits(), &Adjacency::Metric, &PrivacyLoss::Pure(1.0)).unwrap();
        assert_eq!(bad.verdict, Verdict::Fail);
        let w = bad.witness.unwrap();
        assert_eq!(w.outcomes.len(), 1);
        assert!((w.p / w.p_prime - 3.0).abs() < 1e-12);
    }

    #[test]
    fn soundness_over_family() {
        for p in [0.6, 0.75, 0.9] {
            let rr = randomized_response(p).unwrap();
            let truth = (p / (1.0 - p)).ln();
            for claim in [truth, truth + 0.01, truth + 1.0] {
                let r = exact_divergence_check(&rr, &bits(), &Adjacency::Metric, &PrivacyLoss::Pure(claim)).unwrap();
                assert_eq!(r.verdict, Verdict::Pass, "p={p} claim={claim}");
            }
            for claim in [truth - 0.01, truth / 2.0, 0.0] {
                let r = exact_divergence_check(&rr, &bits(), &Adjacency::Metric, &PrivacyLoss::Pure(claim)).unwrap();
                assert_eq!(r.verdict, Verdict::Fail, "p={p} claim={claim}");
            }
        }
    }

    #[test]
    fn joint_of_two_copies() {
        let rr = randomized_response(0.75).unwrap();
        let two = compose_basic(&[rr.clone(), rr]).unwrap();
        let l3 = 3f64.ln();
        let pass = exact_divergence_check(&two, &bits(), &Adjacency::Metric, &PrivacyLoss::Pure(2.0 * l3)).unwrap();
        assert_eq!(pass.verdict, Verdict::Pass);
        let fail =
            exact_divergence_check(&two, &bits(), &Adjacency::Metric, &PrivacyLoss::Pure(2.0 * l3 - 0.01)).unwrap();
        assert_eq!(fail.verdict, Verdict::Fail);
    }

    #[test]
    fn approximate_claims_use_hockey_stick() {
        let rr = randomized_response(0.75).unwrap();
        // at ε = 0: δ = TV distance = 0.5
        let r =
            exact_divergence_check(&rr, &bits(), &Adjacency::Metric, &PrivacyLoss::approx(0.0, 0.5).unwrap()).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
        assert!((r.delta_at_claim - 0.5).abs() < 1e-12);
        let r =
            exact_divergence_check(&rr, &bits(), &Adjacency::Metric, &PrivacyLoss::approx(0.0, 0.4).unwrap()).unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
    }

    #[test]
    fn exact_check_preconditions() {
        let lap = laplace_noise(&LaplaceScale::new(1.0).unwrap()).unwrap();
        assert_eq!(
            exact_divergence_check(&lap, &[Value::Scalar(0.0)], &Adjacency::Metric, &PrivacyLoss::Pure(1.0))
                .unwrap_err(),
            Error::NotEnumerable
        );
        let rr = randomized_response(0.75).unwrap();
        let seven = vec![Value::Bit(true); 7];
        assert_eq!(
            exact_divergence_check(&rr, &seven, &Adjacency::Metric, &PrivacyLoss::Pure(1.0)).unwrap_err(),
            Error::InputSpaceTooLarge(7)
        );
        let r = exact_divergence_check(&rr, &bits(), &Adjacency::Pairs(vec![(0, 1)]), &PrivacyLoss::Pure(1.1)).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
    }

    fn count_domain() -> DatasetDomain {
        DatasetDomain::new(Schema::of(&[("value", CellKind::Int64)]).unwrap())
    }

    fn inflated_count(eps: f64) -> Measurement {
        // scale 1/(2ε) while claiming ε
        let honest = noisy_count(&count_domain(), Metric::SymmetricDistance, eps).unwrap();
        let b = 1.0 / (2.0 * eps);
        Measurement::new(
            honest.input_domain().clone(),
            Metric::SymmetricDistance,
            Domain::Scalar,
            MeasureKind::PureDp,
            move |x, rng| Ok(Value::Scalar(x.as_dataset()?.len() as f64 + crate::mechanisms::sample_laplace(rng, b))),
            PrivacyMap::linear(PrivacyLoss::Pure(eps)).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn stochastic_detects_inflation() {
        let cfg = StochasticConfig::new(50_000, 0.01, 3).unwrap();
        let good = noisy_count(&count_domain(), Metric::SymmetricDistance, 1.0).unwrap();
        let r = stochastic_test(&good, &PrivacyLoss::Pure(1.0), &cfg).unwrap();
        assert_eq!(r.verdict, Verdict::Pass, "{}", r.summary);
        let bad = inflated_count(1.0);
        let r = stochastic_test(&bad, &PrivacyLoss::Pure(1.0), &cfg).unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
        let c = r.counterexample.unwrap();
        assert_eq!(replay(&bad, &c, cfg.samples, &PrivacyLoss::Pure(1.0)).unwrap(), c.p_value);
    }

    #[test]
    fn stochastic_preconditions() {
        assert_eq!(
            StochasticConfig::new(9_999, 0.01, 0).unwrap_err(),
            Error::InsufficientSamples { min: 10_000, actual: 9_999 }
        );
        assert!(matches!(StochasticConfig::new(10_000, 0.2, 0), Err(Error::InvalidSignificance(_))));
        assert!(matches!(StochasticConfig::new(10_000, 0.0, 0), Err(Error::InvalidSignificance(_))));
        let cfg = StochasticConfig::new(10_000, 0.05, 0).unwrap();
        let r = stochastic_test(&inflated_count(1.0), &PrivacyLoss::Pure(f64::INFINITY), &cfg).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
    }

    #[test]
    fn candidate_pairs_are_adjacent() {
        for metric in [Metric::SymmetricDistance, Metric::ChangeOneDistance] {
            let m = noisy_count(&count_domain(), metric, 1.0).unwrap();
            for (a, b) in candidate_pairs(&m).unwrap() {
                assert_eq!(metric.distance(&a, &b).unwrap(), 1.0);
            }
        }
        let rr = randomized_response(0.9).unwrap();
        let cfg = StochasticConfig::new(20_000, 0.05, 1).unwrap();
        assert_eq!(stochastic_test(&rr, &PrivacyLoss::Pure(9f64.ln()), &cfg).unwrap().verdict, Verdict::Pass);
        assert_eq!(stochastic_test(&rr, &PrivacyLoss::Pure(0.5), &cfg).unwrap().verdict, Verdict::Fail);
    }
}
